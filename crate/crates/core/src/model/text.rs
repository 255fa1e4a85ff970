//! Line-oriented model text format.
//!
//! ```text
//! # comment
//! mode clausal
//! var a 2
//! var b 3
//! feature 0.693 a=1
//! feature HARD !a=1 b=2
//! ```

use std::fmt::Write as _;

use super::{FeatureKind, GraphicalModel, Literal, Weight};
use crate::error::ParseError;

pub fn parse_model(text: &str) -> Result<GraphicalModel, ParseError> {
    let mut model = GraphicalModel::new(FeatureKind::Clausal);
    let mut saw_mode = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        let err = |msg: String| ParseError::new(line_no, msg);
        match keyword {
            "mode" => {
                if saw_mode {
                    return Err(err("duplicate mode statement".into()));
                }
                if !model.features.is_empty() {
                    return Err(err("mode must precede all features".into()));
                }
                model.kind = match tokens.next() {
                    Some("clausal") => FeatureKind::Clausal,
                    Some("conjunctive") => FeatureKind::Conjunctive,
                    Some(other) => return Err(err(format!("unknown mode '{other}'"))),
                    None => return Err(err("mode requires an argument".into())),
                };
                saw_mode = true;
            }
            "var" => {
                let name = tokens.next().ok_or_else(|| err("var requires a name".into()))?;
                if !is_name(name) {
                    return Err(err(format!("invalid variable name '{name}'")));
                }
                if model.var_by_name(name).is_some() {
                    return Err(err(format!("variable '{name}' declared twice")));
                }
                let card: usize = tokens
                    .next()
                    .ok_or_else(|| err("var requires a cardinality".into()))?
                    .parse()
                    .map_err(|_| err("cardinality is not an integer".into()))?;
                if card < 2 {
                    return Err(err(format!("cardinality of '{name}' must be at least 2")));
                }
                model.add_variable(name, card);
            }
            "feature" => {
                let w = tokens.next().ok_or_else(|| err("feature requires a weight".into()))?;
                let weight = if w == "HARD" {
                    Weight::Hard
                } else {
                    let w: f64 = w.parse().map_err(|_| err(format!("invalid weight '{w}'")))?;
                    if !w.is_finite() {
                        return Err(err(format!("weight must be finite, got {w}")));
                    }
                    Weight::Soft(w)
                };
                let mut literals = Vec::new();
                for tok in tokens.by_ref() {
                    literals.push(parse_literal(&model, tok).map_err(err)?);
                }
                if literals.is_empty() {
                    return Err(err("feature has no literals".into()));
                }
                model.add_feature(literals, weight);
            }
            other => return Err(err(format!("unknown statement '{other}'"))),
        }
        if let Some(extra) = tokens.next() {
            return Err(ParseError::new(line_no, format!("unexpected token '{extra}'")));
        }
    }
    Ok(model)
}

fn parse_literal(model: &GraphicalModel, tok: &str) -> Result<Literal, String> {
    let (positive, body) = match tok.strip_prefix('!') {
        Some(rest) => (false, rest),
        None => (true, tok),
    };
    let (name, value) = body
        .split_once('=')
        .ok_or_else(|| format!("literal '{tok}' is not of the form name=value"))?;
    let var = model
        .var_by_name(name)
        .ok_or_else(|| format!("undeclared variable '{name}'"))?;
    let value: usize = value.parse().map_err(|_| format!("invalid value in literal '{tok}'"))?;
    let card = model.variables[var].cardinality;
    if value >= card {
        return Err(format!("value {value} out of range for '{name}' (cardinality {card})"));
    }
    Ok(Literal { var, value, positive })
}

fn is_name(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with('!')
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | '[' | ']'))
}

/// Serializes a model; the output parses back to an equal model.
pub fn write_model(model: &GraphicalModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mode {}", model.kind.as_str());
    for v in &model.variables {
        let _ = writeln!(out, "var {} {}", v.name, v.cardinality);
    }
    for f in &model.features {
        let _ = write!(out, "feature {}", f.weight);
        for l in &f.literals {
            let _ = write!(out, " {}", model.literal_label(l));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{toy_g1, toy_g2, toy_g3_nec};
    use proptest::prelude::*;

    #[test]
    fn parses_basic_model() {
        let m =
            parse_model("# G3\nmode clausal\nvar a 2\nvar b 3\nfeature 0.5 a=1\nfeature 0.5 b=1 b=2 # two\n").unwrap();
        assert_eq!(m.num_vars(), 2);
        assert_eq!(m.features.len(), 2);
        assert_eq!(m.features[1].literals, vec![Literal::eq(1, 1), Literal::eq(1, 2)]);
    }

    #[test]
    fn parses_negation_and_hard() {
        let m = parse_model("mode conjunctive\nvar x 2\nvar y 2\nfeature HARD !x=1 y=0\n").unwrap();
        assert_eq!(m.kind, FeatureKind::Conjunctive);
        assert_eq!(m.features[0].weight, Weight::Hard);
        assert_eq!(m.features[0].literals, vec![Literal::ne(0, 1), Literal::eq(1, 0)]);
    }

    #[test]
    fn rejects_undeclared_variable_with_line() {
        let e = parse_model("var a 2\n\nfeature 1 b=1\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("undeclared"));
    }

    #[test]
    fn rejects_out_of_range_value_with_line() {
        let e = parse_model("var a 2\nfeature 1 a=2\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("out of range"));
    }

    #[test]
    fn rejects_misc_errors() {
        assert_eq!(parse_model("var a 1\n").unwrap_err().line, 1);
        assert_eq!(parse_model("var a 2\nvar a 2\n").unwrap_err().line, 2);
        assert_eq!(parse_model("var a 2\nfeature x a=1\n").unwrap_err().line, 2);
        assert_eq!(parse_model("var a 2\nfeature 1\n").unwrap_err().line, 2);
        assert_eq!(
            parse_model("var a 2\nfeature 1 a=1\nmode clausal\n").unwrap_err().line,
            3
        );
        assert_eq!(parse_model("frob\n").unwrap_err().line, 1);
        assert_eq!(parse_model("var a 2 3\n").unwrap_err().line, 1);
    }

    #[test]
    fn toys_round_trip() {
        for m in [toy_g1(0.3, 0.7), toy_g2(1.5, -0.25), toy_g3_nec(2f64.ln())] {
            let back = parse_model(&write_model(&m)).unwrap();
            assert_eq!(back, m);
        }
    }

    fn arb_model() -> impl Strategy<Value = GraphicalModel> {
        (
            prop::collection::vec(2usize..5, 1..5),
            any::<bool>(),
            prop::collection::vec(
                (
                    prop::collection::vec((0usize..8, 0usize..8, any::<bool>()), 1..4),
                    prop_oneof![Just(None), (-3.0f64..3.0).prop_map(Some)],
                ),
                0..6,
            ),
        )
            .prop_map(|(cards, conj, feats)| {
                let kind = if conj {
                    FeatureKind::Conjunctive
                } else {
                    FeatureKind::Clausal
                };
                let mut m = GraphicalModel::new(kind);
                for (i, c) in cards.iter().enumerate() {
                    m.add_variable(format!("x{i}"), *c);
                }
                for (lits, w) in feats {
                    let lits = lits
                        .into_iter()
                        .map(|(v, val, pos)| {
                            let var = v % cards.len();
                            Literal {
                                var,
                                value: val % cards[var],
                                positive: pos,
                            }
                        })
                        .collect();
                    m.add_feature(lits, w.map_or(Weight::Hard, Weight::Soft));
                }
                m
            })
    }

    proptest! {
        #[test]
        fn canonical_stable_under_reparse(m in arb_model()) {
            let back = parse_model(&write_model(&m)).unwrap();
            prop_assert!(back.canonically_equal(&m));
            let canon = m.canonical();
            let canon_back = parse_model(&write_model(&canon));
            // canonical forms may hold an empty unsatisfiable hard feature,
            // which has no text spelling
            if canon.features.iter().all(|f| !f.literals.is_empty()) {
                prop_assert_eq!(canon_back.unwrap().canonical(), canon.clone());
            }
            prop_assert_eq!(canon.canonical(), canon);
        }
    }
}
