//! Level functions given in a config: a number, a named analytic such as
//! `linear(1, 0.1)`, or a table interpolated linearly.

use std::fmt;
use std::sync::Arc;

use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum RawFn {
    Number(f64),
    Named(String),
    Table { levels: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LevelFunction {
    Constant(f64),
    /// `a + b x`
    Linear(f64, f64),
    /// `-a - b x`
    ParetoDrift(f64, f64),
    WeibullDrift(f64),
    Table(Vec<f64>, Vec<f64>),
}

impl fmt::Display for LevelFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelFunction::Constant(a) => write!(f, "constant({a})"),
            LevelFunction::Linear(a, b) => write!(f, "linear({a}, {b})"),
            LevelFunction::ParetoDrift(a, b) => write!(f, "pareto_drift({a}, {b})"),
            LevelFunction::WeibullDrift(beta) => write!(f, "weibull_drift({beta})"),
            LevelFunction::Table(x, _) => write!(f, "table({} points)", x.len()),
        }
    }
}

fn parse_call(s: &str) -> Result<(String, Vec<f64>), String> {
    let s = s.trim();
    let open = s.find('(').ok_or_else(|| format!("expected name(args), got `{s}`"))?;
    if !s.ends_with(')') {
        return Err(format!("missing `)` in `{s}`"));
    }
    let name = s[..open].trim().to_string();
    let inner = &s[open + 1..s.len() - 1];
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| format!("bad number `{}` in `{s}`", a.trim())))
            .collect::<Result<_, _>>()?
    };
    Ok((name, args))
}

impl LevelFunction {
    pub fn parse(raw: &RawFn) -> Result<Self, String> {
        match raw {
            RawFn::Number(a) => Ok(LevelFunction::Constant(*a)),
            RawFn::Table { levels, values } => {
                if levels.len() != values.len() || levels.is_empty() {
                    return Err("table needs equally many levels and values (at least one)".into());
                }
                if levels.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err("table levels must be strictly increasing".into());
                }
                Ok(LevelFunction::Table(levels.clone(), values.clone()))
            }
            RawFn::Named(s) => {
                let (name, args) = parse_call(s)?;
                let arity = |n: usize| {
                    if args.len() == n {
                        Ok(())
                    } else {
                        Err(format!("`{name}` takes {n} argument(s), got {}", args.len()))
                    }
                };
                match name.as_str() {
                    "constant" => arity(1).map(|_| LevelFunction::Constant(args[0])),
                    "linear" => arity(2).map(|_| LevelFunction::Linear(args[0], args[1])),
                    "pareto_drift" => {
                        arity(2)?;
                        hybrid_risk::jumps::pareto_drift(args[0], args[1]).map_err(|e| e.to_string())?;
                        Ok(LevelFunction::ParetoDrift(args[0], args[1]))
                    }
                    "weibull_drift" => {
                        arity(1)?;
                        hybrid_risk::jumps::weibull_drift(args[0]).map_err(|e| e.to_string())?;
                        Ok(LevelFunction::WeibullDrift(args[0]))
                    }
                    other => Err(format!(
                        "unknown function `{other}` (expected constant, linear, pareto_drift or weibull_drift)"
                    )),
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            LevelFunction::Constant(a) => *a,
            LevelFunction::Linear(a, b) => a + b * x,
            LevelFunction::ParetoDrift(a, b) => -a - b * x,
            LevelFunction::WeibullDrift(beta) => -1.0 / (beta * x.abs().powf(beta - 1.0)),
            LevelFunction::Table(xs, ys) => {
                let k = xs.partition_point(|v| *v <= x);
                if k == 0 {
                    ys[0]
                } else if k == xs.len() {
                    ys[k - 1]
                } else {
                    let w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                    ys[k - 1] + w * (ys[k] - ys[k - 1])
                }
            }
        }
    }

    /// Lipschitz constant, infinite when there is none.
    pub fn lipschitz(&self) -> f64 {
        match self {
            LevelFunction::Constant(_) => 0.0,
            LevelFunction::Linear(_, b) | LevelFunction::ParetoDrift(_, b) => b.abs(),
            LevelFunction::WeibullDrift(beta) if *beta == 1.0 => 0.0,
            LevelFunction::WeibullDrift(_) => f64::INFINITY,
            LevelFunction::Table(xs, ys) => xs
                .windows(2)
                .zip(ys.windows(2))
                .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Supremum of `|f|` over `[a, b]`; exact for every variant except the
    /// Weibull drift, which is sampled.
    pub fn sup_abs(&self, a: f64, b: f64) -> f64 {
        let mut pts = vec![a, b];
        match self {
            LevelFunction::Table(xs, _) => pts.extend(xs.iter().copied().filter(|x| *x > a && *x < b)),
            LevelFunction::WeibullDrift(_) => pts.extend((1..4096).map(|k| a + (b - a) * k as f64 / 4096.0)),
            _ => {}
        }
        pts.iter().map(|x| self.eval(*x).abs()).fold(0.0, f64::max)
    }

    pub fn into_fn(self) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
        Arc::new(move |x| self.eval(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(s: &str) -> Result<LevelFunction, String> {
        LevelFunction::parse(&RawFn::Named(s.into()))
    }

    #[test]
    fn named_analytics() {
        assert_eq!(named("linear(1, 0.1)").unwrap().eval(2.0), 1.2);
        assert_eq!(named(" constant( -1 ) ").unwrap(), LevelFunction::Constant(-1.0));
        assert_eq!(named("pareto_drift(1,0.5)").unwrap().eval(2.0), -2.0);
        assert!((named("weibull_drift(2)").unwrap().eval(4.0) + 0.125).abs() < 1e-15);
        assert_eq!(named("linear(1, -3)").unwrap().lipschitz(), 3.0);
    }

    #[test]
    fn bad_names_and_arity() {
        assert!(named("quadratic(1)").unwrap_err().contains("unknown function"));
        assert!(named("linear(1)").unwrap_err().contains("2 argument"));
        assert!(named("linear(1, x)").unwrap_err().contains("bad number"));
        assert!(named("pareto_drift(0, 1)").is_err());
    }

    #[test]
    fn tables_interpolate_and_hold_ends() {
        let t = LevelFunction::parse(&RawFn::Table {
            levels: vec![0.0, 1.0, 3.0],
            values: vec![1.0, 2.0, 0.0],
        })
        .unwrap();
        assert_eq!(t.eval(-5.0), 1.0);
        assert_eq!(t.eval(0.5), 1.5);
        assert_eq!(t.eval(2.0), 1.0);
        assert_eq!(t.eval(9.0), 0.0);
        assert_eq!(t.lipschitz(), 1.0);
        assert_eq!(t.sup_abs(-1.0, 0.5), 1.5);
    }
}
