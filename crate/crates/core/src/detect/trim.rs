use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How many order statistics are dropped from each end of the candidate set.
///
/// Written as `count:<g>` or `fraction:<δ>` in configuration files and flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Trim {
    /// g = ⌊δ·|I_t|⌋, δ ∈ [0, 0.5)
    Fraction(f64),
    /// g fixed
    Count(usize),
}

impl Trim {
    /// Number of values trimmed from each end of a set of size `n`.
    pub fn count_for(self, n: usize) -> usize {
        match self {
            Trim::Fraction(delta) => (delta * n as f64).floor() as usize,
            Trim::Count(g) => g,
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            Trim::Fraction(delta) if !(0.0..0.5).contains(&delta) => {
                Err(Error::Config(format!("trim fraction {delta} must lie in [0, 0.5)")))
            }
            _ => Ok(()),
        }
    }

    /// Checks that trimming a set of size `n` leaves at least one value.
    pub fn check_leaves_one(self, n: usize) -> Result<usize> {
        self.validate()?;
        let g = self.count_for(n);
        if n < 2 * g + 1 {
            return Err(Error::Config(format!(
                "trimming {g} values from each end of {n} leaves nothing to average"
            )));
        }
        Ok(g)
    }
}

impl fmt::Display for Trim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trim::Fraction(delta) => write!(f, "fraction:{delta}"),
            Trim::Count(g) => write!(f, "count:{g}"),
        }
    }
}

impl FromStr for Trim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse trim `{s}`; expected `count:<g>` or `fraction:<δ>`"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let trim = match kind.trim() {
            "count" => Trim::Count(value.trim().parse().map_err(|_| bad())?),
            "fraction" => Trim::Fraction(value.trim().parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        trim.validate()?;
        Ok(trim)
    }
}

impl TryFrom<String> for Trim {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Trim> for String {
    fn from(t: Trim) -> String {
        t.to_string()
    }
}

/// Positions of `values` in ascending order; equal values keep their
/// position order, so the lower position ranks first.
pub(crate) fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Mean of the values left after dropping the g smallest and g largest.
pub fn truncated_mean(values: &[f64], trim: Trim) -> Result<f64> {
    let g = trim.check_leaves_one(values.len())?;
    let order = ascending_order(values);
    let kept = &order[g..values.len() - g];
    Ok(kept.iter().map(|&i| values[i]).sum::<f64>() / kept.len() as f64)
}

/// Flags the g smallest and g largest values.
pub fn trimmed_set(values: &[f64], g: usize) -> Vec<bool> {
    let n = values.len();
    let mut trimmed = vec![false; n];
    if 2 * g >= n {
        trimmed.iter_mut().for_each(|t| *t = true);
        return trimmed;
    }
    let order = ascending_order(values);
    for &i in order[..g].iter().chain(&order[n - g..]) {
        trimmed[i] = true;
    }
    trimmed
}

/// Contrast L_m with L_mᵀβ = β_m − (mean of the untrimmed β).
///
/// Untrimmed positions other than m get −1/n', where n' is the untrimmed
/// count; m gets 1 − 1/n' if untrimmed and 1 if trimmed; other trimmed
/// positions get 0.
pub fn contrast_vector(m: usize, trimmed: &[bool]) -> Result<DVector<f64>> {
    let n = trimmed.len();
    if m >= n {
        return Err(Error::Input(format!("candidate {m} is not in a set of size {n}")));
    }
    let kept = trimmed.iter().filter(|t| !**t).count();
    if kept == 0 {
        return Err(Error::Config("every candidate is trimmed".into()));
    }
    let w = 1.0 / kept as f64;
    Ok(DVector::from_fn(n, |h, _| {
        let base = if trimmed[h] { 0.0 } else { -w };
        if h == m {
            1.0 + base
        } else {
            base
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_middle_three() {
        assert_eq!(truncated_mean(&[1.0, 2.0, 3.0, 4.0, 100.0], Trim::Count(1)).unwrap(), 3.0);
        assert_eq!(truncated_mean(&[100.0, 3.0, 1.0, 4.0, 2.0], Trim::Count(1)).unwrap(), 3.0);
    }

    #[test]
    fn constant_vector() {
        for trim in [Trim::Count(0), Trim::Count(1), Trim::Fraction(0.25), Trim::Fraction(0.0)] {
            assert_eq!(truncated_mean(&[5.0; 4], trim).unwrap(), 5.0);
        }
    }

    #[test]
    fn zero_trim_is_plain_mean() {
        let v = [1.0, 2.0, 6.0];
        assert_eq!(truncated_mean(&v, Trim::Count(0)).unwrap(), 3.0);
        assert_eq!(truncated_mean(&v, Trim::Fraction(0.3)).unwrap(), 3.0);
    }

    #[test]
    fn over_trimming_is_rejected() {
        assert!(matches!(truncated_mean(&[1.0, 2.0], Trim::Count(1)), Err(Error::Config(_))));
        assert!(matches!(truncated_mean(&[1.0; 4], Trim::Fraction(0.5)), Err(Error::Config(_))));
        assert!(matches!(truncated_mean(&[], Trim::Count(0)), Err(Error::Config(_))));
    }

    #[test]
    fn plain_contrast() {
        let l = contrast_vector(1, &[false; 5]).unwrap();
        let expected = [-0.2, 0.8, -0.2, -0.2, -0.2];
        for (a, b) in l.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn trimmed_contrast_for_largest() {
        let beta = [3.0, 1.0, 9.0, 4.0, 5.0];
        let trimmed = trimmed_set(&beta, 1);
        assert_eq!(trimmed, vec![false, true, true, false, false]);
        let l = contrast_vector(2, &trimmed).unwrap();
        assert_eq!(l[2], 1.0);
        assert_eq!(l[1], 0.0);
        for h in [0, 3, 4] {
            assert!((l[h] + 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(contrast_vector(5, &trimmed).is_err());
    }

    #[test]
    fn ties_trim_lower_position_first() {
        assert_eq!(trimmed_set(&[1.0, 1.0, 2.0, 3.0, 3.0], 1), vec![true, false, false, false, true]);
    }

    #[test]
    fn trim_syntax() {
        assert_eq!("count:10".parse::<Trim>().unwrap(), Trim::Count(10));
        assert_eq!("fraction:0.1".parse::<Trim>().unwrap(), Trim::Fraction(0.1));
        assert!("fraction:0.6".parse::<Trim>().is_err());
        assert!("10".parse::<Trim>().is_err());
        assert_eq!(Trim::Count(3).to_string().parse::<Trim>().unwrap(), Trim::Count(3));
    }
}
