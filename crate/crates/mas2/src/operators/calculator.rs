/// Arithmetic evaluator behind the `calculator` tool.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot evaluate `{expr}`: {reason}")]
pub struct CalcError {
    pub expr: String,
    pub reason: String,
}

/// Evaluates with `fasteval`, adding the common one-argument functions it
/// lacks. Integral results print without a fractional part.
pub fn evaluate_expression(expr: &str) -> Result<String, CalcError> {
    let mut ns = |name: &str, args: Vec<f64>| -> Option<f64> {
        let x = *args.first()?;
        Some(match (name, args.len()) {
            ("sqrt", 1) => x.sqrt(),
            ("exp", 1) => x.exp(),
            ("ln", 1) => x.ln(),
            ("log10", 1) => x.log10(),
            ("pow", 2) => x.powf(args[1]),
            _ => return None,
        })
    };
    let cleaned = expr.trim().replace("**", "^");
    let v = fasteval::ez_eval(&cleaned, &mut ns).map_err(|e| CalcError { expr: expr.into(), reason: format!("{e:?}") })?;
    if !v.is_finite() {
        return Err(CalcError { expr: expr.into(), reason: "result is not finite".into() });
    }
    if v.fract() == 0.0 && v.abs() < 1e15 {
        Ok(format!("{}", v as i64))
    } else {
        Ok(format!("{v}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates() {
        assert_eq!(evaluate_expression("7/2").unwrap(), "3.5");
        assert_eq!(evaluate_expression("2**10 + sqrt(16)").unwrap(), "1028");
        assert_eq!(evaluate_expression("-(3 - 5) * 4").unwrap(), "8");
        assert!(evaluate_expression("1 +").is_err());
        assert!(evaluate_expression("1/0").is_err());
    }
}
