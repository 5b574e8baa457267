use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Constant,
    PiecewiseConstant,
}

/// The 1-periodic axial coefficient `a(y₃)` of the fibre, piecewise constant
/// on `[b_i, b_{i+1})` with `b_0 = 0`, together with an ellipticity constant
/// `ν` such that `ν < a < 1/ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientProfile {
    kind: ProfileKind,
    values: Vec<f64>,
    breakpoints: Vec<f64>,
    nu: f64,
}

impl CoefficientProfile {
    pub fn constant(value: f64) -> Result<Self> {
        Self::build(ProfileKind::Constant, vec![value], vec![0.0], None)
    }

    pub fn piecewise(values: Vec<f64>, breakpoints: Vec<f64>) -> Result<Self> {
        Self::build(ProfileKind::PiecewiseConstant, values, breakpoints, None)
    }

    /// Replaces the automatically chosen ellipticity constant.
    pub fn with_nu(self, nu: f64) -> Result<Self> {
        Self::build(self.kind, self.values, self.breakpoints, Some(nu))
    }

    fn build(
        kind: ProfileKind,
        values: Vec<f64>,
        breakpoints: Vec<f64>,
        nu: Option<f64>,
    ) -> Result<Self> {
        if values.is_empty() || values.len() != breakpoints.len() {
            return Err(Error::Parameter(format!(
                "profile needs one value per breakpoint ({} values, {} breakpoints)",
                values.len(),
                breakpoints.len()
            )));
        }
        if kind == ProfileKind::Constant && values.len() != 1 {
            return Err(Error::Parameter("constant profile takes a single value".into()));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::Parameter("first breakpoint must be 0".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) || breakpoints.iter().any(|&b| b >= 1.0) {
            return Err(Error::Parameter(
                "breakpoints must be strictly ascending in [0,1)".into(),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Parameter("profile values must be positive".into()));
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(0.0, f64::max);
        let nu = match nu {
            Some(nu) => nu,
            None => 0.5 * lo.min(1.0 / hi),
        };
        if !(nu > 0.0 && nu < 1.0) || !(nu < lo && hi < 1.0 / nu) {
            return Err(Error::Parameter(format!(
                "ellipticity bound nu={nu} violated by values in [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            kind,
            values,
            breakpoints,
            nu,
        })
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Value at `s`, reduced modulo 1.
    pub fn value_at(&self, s: f64) -> f64 {
        let s = s - s.floor();
        let idx = self.breakpoints.partition_point(|&b| b <= s);
        self.values[idx.saturating_sub(1)]
    }

    /// Iterator over `(length, value)` of the constant pieces of one period.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.values.len()).map(move |i| {
            let end = self.breakpoints.get(i + 1).copied().unwrap_or(1.0);
            (end - self.breakpoints[i], self.values[i])
        })
    }

    pub fn arithmetic_mean(&self) -> f64 {
        self.pieces().map(|(len, v)| len * v).sum()
    }

    /// The profile `s ↦ a(s + offset)`, i.e. the same medium seen from a
    /// shifted cell origin.
    pub fn shifted(&self, offset: f64) -> Result<Self> {
        let offset = offset - offset.floor();
        if offset == 0.0 {
            return Ok(self.clone());
        }
        // New breakpoints are old ones minus the offset, wrapped; 0 is always one.
        let mut cuts: Vec<f64> = self
            .breakpoints
            .iter()
            .map(|&b| {
                let c = b - offset;
                c - c.floor()
            })
            .collect();
        cuts.push(0.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let values: Vec<f64> = cuts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let end = cuts.get(i + 1).copied().unwrap_or(1.0);
                self.value_at(0.5 * (c + end) + offset)
            })
            .collect();
        let kind = if values.len() == 1 {
            ProfileKind::Constant
        } else {
            ProfileKind::PiecewiseConstant
        };
        Self::build(kind, values, cuts, Some(self.nu))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_respects_breakpoints() {
        let p = CoefficientProfile::piecewise(vec![1.0, 4.0], vec![0.0, 0.5]).unwrap();
        assert_eq!(p.value_at(0.0), 1.0);
        assert_eq!(p.value_at(0.49), 1.0);
        assert_eq!(p.value_at(0.5), 4.0);
        assert_eq!(p.value_at(1.2), 1.0);
        assert_eq!(p.value_at(-0.25), 4.0);
        assert!((p.arithmetic_mean() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_profiles() {
        assert!(CoefficientProfile::piecewise(vec![1.0, 4.0], vec![0.1, 0.5]).is_err());
        assert!(CoefficientProfile::piecewise(vec![1.0, 4.0], vec![0.0, 0.0]).is_err());
        assert!(CoefficientProfile::piecewise(vec![1.0], vec![0.0, 0.5]).is_err());
        assert!(CoefficientProfile::constant(-1.0).is_err());
        assert!(CoefficientProfile::constant(2.0).unwrap().with_nu(0.6).is_err());
        assert!(CoefficientProfile::constant(2.0).unwrap().with_nu(0.4).is_ok());
    }

    #[test]
    fn shift_rotates_pieces() {
        let p = CoefficientProfile::piecewise(vec![1.0, 4.0, 2.0], vec![0.0, 0.3, 0.6]).unwrap();
        let q = p.shifted(0.4).unwrap();
        for s in [0.0, 0.1, 0.25, 0.55, 0.7, 0.95] {
            assert_eq!(q.value_at(s), p.value_at(s + 0.4), "s={s}");
        }
        assert!((q.arithmetic_mean() - p.arithmetic_mean()).abs() < 1e-14);
    }
}
