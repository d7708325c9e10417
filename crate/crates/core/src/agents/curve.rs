use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const CURVE_HEADER: &str = "update,exact_start_value,rollout_return_mean,rollout_return_stderr";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub update: usize,
    pub exact_start_value: f64,
    pub rollout_return_mean: f64,
    pub rollout_return_stderr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn push(&mut self, p: CurvePoint) {
        self.points.push(p);
    }

    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CURVE_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?}",
                p.update, p.exact_start_value, p.rollout_return_mean, p.rollout_return_stderr
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CURVE_HEADER => {}
            Some(_) => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header `{CURVE_HEADER}`"),
                })
            }
            None => return Err(Error::Parse { line: 1, msg: "empty curve".into() }),
        }
        let mut points = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Parse { line: i + 1, msg };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", f.len())));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
            points.push(CurvePoint {
                update: f[0].trim().parse().map_err(|e| bad(format!("{:?}: {e}", f[0])))?,
                exact_start_value: num(f[1])?,
                rollout_return_mean: num(f[2])?,
                rollout_return_stderr: num(f[3])?,
            });
        }
        if points.is_empty() {
            return Err(Error::Parse { line: 2, msg: "curve has no rows".into() });
        }
        Ok(Self { points })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut c = LearningCurve::default();
        c.push(CurvePoint {
            update: 0,
            exact_start_value: 0.1 + 0.2,
            rollout_return_mean: 77.0,
            rollout_return_stderr: 0.0,
        });
        c.push(CurvePoint {
            update: 1000,
            exact_start_value: 1.0 / 3.0,
            rollout_return_mean: 12.5,
            rollout_return_stderr: 1e-300,
        });
        let back = LearningCurve::from_csv(&c.to_csv()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn csv_errors() {
        assert!(LearningCurve::from_csv("").is_err());
        assert!(LearningCurve::from_csv(CURVE_HEADER).is_err());
        let e = LearningCurve::from_csv(&format!("{CURVE_HEADER}\n1,2,3\n")).unwrap_err();
        assert_eq!(e, Error::Parse { line: 2, msg: "expected 4 fields, found 3".into() });
    }
}
