//! Influence functions: the distance-to-weight kernel shared by both models
//! and by the certificate engine.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Parameter families accepted by [`InfluenceFunction`].
///
/// Serialized adjacently tagged, e.g.
/// `{"family": "power-law", "params": {"exponent": 0.5}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "kebab-case")]
pub enum Family {
    /// `psi(s) = level`.
    Constant { level: f64 },
    /// `psi(s) = (1 + s)^(-exponent)`.
    PowerLaw { exponent: f64 },
    /// Piecewise-linear through `(s, psi(s))` knots, clamped past the last knot.
    Tabulated { knots: Vec<(f64, f64)> },
}

/// A validated influence function: globally positive and bounded by one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct InfluenceFunction {
    family: Family,
}

impl TryFrom<Family> for InfluenceFunction {
    type Error = Error;

    fn try_from(family: Family) -> Result<Self> {
        match &family {
            Family::Constant { level } => {
                if !(level.is_finite() && *level > 0.0 && *level <= 1.0) {
                    return Err(domain(format!(
                        "constant influence level must lie in (0, 1], got {level}"
                    )));
                }
            }
            Family::PowerLaw { exponent } => {
                if !(exponent.is_finite() && *exponent >= 0.0) {
                    return Err(domain(format!(
                        "power-law exponent must be finite and >= 0, got {exponent}"
                    )));
                }
            }
            Family::Tabulated { knots } => validate_knots(knots)?,
        }
        Ok(Self { family })
    }
}

impl From<InfluenceFunction> for Family {
    fn from(f: InfluenceFunction) -> Self {
        f.family
    }
}

fn validate_knots(knots: &[(f64, f64)]) -> Result<()> {
    let Some(&(s0, _)) = knots.first() else {
        return Err(domain("tabulated influence needs at least one knot"));
    };
    if s0 != 0.0 {
        return Err(domain(format!("first tabulated knot must sit at s = 0, got {s0}")));
    }
    for w in knots.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(domain("tabulated knots must be strictly increasing in s"));
        }
    }
    for &(s, v) in knots {
        if !s.is_finite() || !(v.is_finite() && v > 0.0) {
            return Err(domain(format!("tabulated value at s = {s} must be positive, got {v}")));
        }
        if v > 1.0 {
            return Err(domain(format!(
                "tabulated value {v} at s = {s} exceeds 1; rescale the kernel explicitly"
            )));
        }
    }
    Ok(())
}

impl InfluenceFunction {
    pub fn constant(level: f64) -> Result<Self> {
        Family::Constant { level }.try_into()
    }

    pub fn power_law(exponent: f64) -> Result<Self> {
        Family::PowerLaw { exponent }.try_into()
    }

    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        Family::Tabulated { knots }.try_into()
    }

    /// The kernel `psi = 1`.
    pub fn unit() -> Self {
        Self { family: Family::Constant { level: 1.0 } }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Evaluates `psi(s)` for `s >= 0`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(domain(format!("influence argument must be >= 0, got {s}")));
        }
        Ok(self.eval_unchecked(s))
    }

    /// Evaluation without the domain check; `s` must be nonnegative.
    #[inline]
    pub(crate) fn eval_unchecked(&self, s: f64) -> f64 {
        match &self.family {
            Family::Constant { level } => *level,
            Family::PowerLaw { exponent } => {
                if *exponent == 0.0 {
                    1.0
                } else {
                    (1.0 + s).powf(-exponent)
                }
            }
            Family::Tabulated { knots } => interpolate(knots, s),
        }
    }

    /// Whether the function is already nonincreasing on `[0, inf)`.
    pub fn is_nonincreasing(&self) -> bool {
        match &self.family {
            Family::Constant { .. } | Family::PowerLaw { .. } => true,
            Family::Tabulated { knots } => knots.windows(2).all(|w| w[1].1 <= w[0].1),
        }
    }

    /// Nonincreasing rearrangement `u -> min_{s in [0,u]} psi(s)`.
    ///
    /// Exact for every family. For tabulated kernels the running minimum is
    /// taken along each linear piece; where a piece drops below the current
    /// minimum mid-segment a knot is inserted at the crossing so the result
    /// is still piecewise linear and matches the rearrangement everywhere.
    pub fn rearrange(&self) -> Self {
        let Family::Tabulated { knots } = &self.family else {
            return self.clone();
        };
        let mut out = Vec::with_capacity(knots.len() + 4);
        out.push(knots[0]);
        let mut run_min = knots[0].1;
        for w in knots.windows(2) {
            let (a, fa) = w[0];
            let (b, fb) = w[1];
            if fb >= run_min {
                out.push((b, run_min));
                continue;
            }
            if fa > run_min {
                let cross = a + (fa - run_min) / (fa - fb) * (b - a);
                if cross > a && cross < b {
                    out.push((cross, run_min));
                }
            }
            out.push((b, fb));
            run_min = fb;
        }
        Self { family: Family::Tabulated { knots: out } }
    }

    /// Upper bound of `psi` on `[0, inf)`.
    pub fn sup(&self) -> f64 {
        match &self.family {
            Family::Constant { level } => *level,
            Family::PowerLaw { .. } => 1.0,
            Family::Tabulated { knots } => knots.iter().map(|k| k.1).fold(0.0, f64::max),
        }
    }

    /// Short human-readable descriptor, e.g. `power-law(0.5)`.
    pub fn describe(&self) -> String {
        match &self.family {
            Family::Constant { level } => format!("constant({level})"),
            Family::PowerLaw { exponent } => format!("power-law({exponent})"),
            Family::Tabulated { knots } => format!("tabulated({} knots)", knots.len()),
        }
    }
}

fn interpolate(knots: &[(f64, f64)], s: f64) -> f64 {
    let last = knots[knots.len() - 1];
    if s >= last.0 {
        return last.1;
    }
    // first knot with abscissa > s; s >= 0 = knots[0].0 so idx >= 1
    let idx = knots.partition_point(|k| k.0 <= s);
    let (a, fa) = knots[idx - 1];
    let (b, fb) = knots[idx];
    fa + (fb - fa) * (s - a) / (b - a)
}

impl std::str::FromStr for InfluenceFunction {
    type Err = Error;

    /// Compact form used on the command line:
    /// `constant:LEVEL`, `power-law:EXPONENT`, `tabulated:S0=V0,S1=V1,...`,
    /// or a JSON object.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return Ok(serde_json::from_str(s)?);
        }
        let (name, arg) = s
            .split_once(':')
            .ok_or_else(|| domain(format!("influence spec `{s}` is not FAMILY:PARAMS")))?;
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| domain(format!("cannot parse `{x}` as a number")))
        };
        match name.trim() {
            "constant" => Self::constant(num(arg)?),
            "power-law" => Self::power_law(num(arg)?),
            "tabulated" => {
                let knots = arg
                    .split(',')
                    .map(|kv| {
                        let (k, v) = kv
                            .split_once('=')
                            .ok_or_else(|| domain(format!("knot `{kv}` is not S=VALUE")))?;
                        Ok((num(k)?, num(v)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::tabulated(knots)
            }
            other => Err(domain(format!("unknown influence family `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_family_returns_level() {
        let f = InfluenceFunction::constant(1.0).unwrap();
        assert_eq!(f.eval(3.7).unwrap(), 1.0);
    }

    #[test]
    fn power_law_values() {
        let f = InfluenceFunction::power_law(0.5).unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 1.0);
        let g = InfluenceFunction::power_law(1.0).unwrap();
        assert_relative_eq!(g.eval(3.0).unwrap(), 1.0 / (1.0 + 3.0), max_relative = 1e-15);
    }

    #[test]
    fn negative_argument_is_a_domain_error() {
        let f = InfluenceFunction::power_law(1.0).unwrap();
        assert!(matches!(f.eval(-0.1), Err(Error::Domain(_))));
        assert!(f.eval(f64::NAN).is_err());
    }

    #[test]
    fn constructor_rejects_unnormalized_kernels() {
        assert!(InfluenceFunction::constant(1.5).is_err());
        assert!(InfluenceFunction::constant(0.0).is_err());
        assert!(InfluenceFunction::power_law(-1.0).is_err());
        assert!(InfluenceFunction::tabulated(vec![(0.0, 1.2)]).is_err());
        assert!(InfluenceFunction::tabulated(vec![(0.0, 1.0), (1.0, 0.0)]).is_err());
        assert!(InfluenceFunction::tabulated(vec![(0.5, 1.0)]).is_err());
        assert!(InfluenceFunction::tabulated(vec![(0.0, 1.0), (0.0, 0.5)]).is_err());
        assert!(InfluenceFunction::tabulated(vec![]).is_err());
    }

    #[test]
    fn tabulated_is_clamped_beyond_last_knot() {
        let f = InfluenceFunction::tabulated(vec![(0.0, 1.0), (2.0, 0.5)]).unwrap();
        assert_eq!(f.eval(1.0).unwrap(), 0.75);
        assert_eq!(f.eval(50.0).unwrap(), 0.5);
    }

    #[test]
    fn monotone_families_rearrange_to_themselves() {
        let c = InfluenceFunction::constant(0.8).unwrap();
        assert_eq!(c.rearrange(), c);
        let p = InfluenceFunction::power_law(2.0).unwrap();
        assert_eq!(p.rearrange(), p);
    }

    #[test]
    fn bump_rearrangement_matches_grid_running_minimum() {
        let f = InfluenceFunction::tabulated(vec![(0.0, 1.0), (1.0, 0.4), (2.0, 0.7), (3.0, 0.3)])
            .unwrap();
        let g = f.rearrange();
        for (s, want) in [(0.0, 1.0), (1.0, 0.4), (2.0, 0.4), (3.0, 0.3)] {
            assert_relative_eq!(g.eval(s).unwrap(), want, max_relative = 1e-14);
        }
        // oracle: running minimum of f on a 1e-3 grid
        let mut run = f64::INFINITY;
        for k in 0..=4000 {
            let u = k as f64 * 1e-3;
            run = run.min(f.eval(u).unwrap());
            assert!((g.eval(u).unwrap() - run).abs() < 1e-12, "u = {u}");
        }
        assert!(g.is_nonincreasing());
    }

    #[test]
    fn serde_shape() {
        let f = InfluenceFunction::power_law(0.5).unwrap();
        let js = serde_json::to_string(&f).unwrap();
        assert_eq!(js, r#"{"family":"power-law","params":{"exponent":0.5}}"#);
        let back: InfluenceFunction = serde_json::from_str(&js).unwrap();
        assert_eq!(back, f);
        let bad = r#"{"family":"constant","params":{"level":2.0}}"#;
        assert!(serde_json::from_str::<InfluenceFunction>(bad).is_err());
    }

    #[test]
    fn compact_parse() {
        let f: InfluenceFunction = "power-law:0.5".parse().unwrap();
        assert_eq!(f, InfluenceFunction::power_law(0.5).unwrap());
        let t: InfluenceFunction = "tabulated:0=1,1=0.5".parse().unwrap();
        assert_eq!(t.eval(0.5).unwrap(), 0.75);
        assert!("cosine:1".parse::<InfluenceFunction>().is_err());
    }
}
