use std::str::FromStr;

use crate::error::{Error, Result};
use crate::real::Real;

thread_local! {
    static CONTEXT: meval::Context<'static> = meval::Context::new();
}

/// A closed-form expression in the single variable `x`.
///
/// Evaluation always happens in `f64`; generic callers cast in and out.
#[derive(Debug, Clone)]
pub struct ParsedExpr {
    source: String,
    expr: meval::Expr,
}

impl ParsedExpr {
    pub fn parse(source: &str) -> Result<Self> {
        let expr = meval::Expr::from_str(source).map_err(|e| Error::Expression {
            source_text: source.to_string(),
            message: e.to_string(),
        })?;
        let parsed = Self {
            source: source.to_string(),
            expr,
        };
        // Unknown identifiers only surface at evaluation time.
        CONTEXT
            .with(|ctx| parsed.expr.eval_with_context((("x", 1.0), ctx)))
            .map_err(|e| Error::Expression {
                source_text: source.to_string(),
                message: e.to_string(),
            })?;
        Ok(parsed)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        CONTEXT
            .with(|ctx| self.expr.eval_with_context((("x", x), ctx)))
            .unwrap_or(f64::NAN)
    }

    pub fn eval_real<T: Real>(&self, x: T) -> Result<T> {
        let y = self.eval_f64(x.as_f64());
        T::from_f64(y).ok_or_else(|| Error::Eval {
            x: x.as_f64(),
            reason: format!("`{}` not representable", self.source),
        })
    }
}
