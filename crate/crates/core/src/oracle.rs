//! Access-logged view of potential outcomes. A design may read at most one
//! arm per unit; asking for the other arm afterwards is an error.

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    Control,
    Treatment,
}

/// Treatment and control outcome vectors, plus ground-truth coefficients
/// when the data are synthetic.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutcomes {
    pub y1: DVector<f64>,
    pub y0: DVector<f64>,
    pub beta1: Option<DVector<f64>>,
    pub beta0: Option<DVector<f64>>,
    pub sigma: Option<f64>,
}

impl PotentialOutcomes {
    pub fn new(y1: DVector<f64>, y0: DVector<f64>) -> Result<Self> {
        if y1.len() != y0.len() {
            return Err(Error::DimensionMismatch {
                what: "control outcome length",
                expected: y1.len(),
                got: y0.len(),
            });
        }
        Ok(Self {
            y1,
            y0,
            beta1: None,
            beta0: None,
            sigma: None,
        })
    }

    /// Single-outcome data with a constant treatment effect: `y1 = y0 + shift`.
    pub fn constant_shift(y0: DVector<f64>, shift: f64) -> Self {
        let y1 = y0.add_scalar(shift);
        Self {
            y1,
            y0,
            beta1: None,
            beta0: None,
            sigma: None,
        }
    }

    pub fn n(&self) -> usize {
        self.y1.len()
    }

    pub fn ite(&self) -> DVector<f64> {
        &self.y1 - &self.y0
    }

    pub fn ate(&self) -> f64 {
        self.ite().mean()
    }

    pub fn oracle(&self) -> OutcomeOracle<'_> {
        OutcomeOracle::new(self)
    }
}

/// One design run's window onto the outcomes.
#[derive(Debug)]
pub struct OutcomeOracle<'a> {
    outcomes: &'a PotentialOutcomes,
    access_log: Vec<Option<Arm>>,
}

impl<'a> OutcomeOracle<'a> {
    pub fn new(outcomes: &'a PotentialOutcomes) -> Self {
        Self {
            outcomes,
            access_log: vec![None; outcomes.n()],
        }
    }

    pub fn n(&self) -> usize {
        self.access_log.len()
    }

    /// Reads one arm of one unit. Re-reading the same arm is allowed.
    pub fn reveal(&mut self, unit: usize, arm: Arm) -> Result<f64> {
        let slot = self.access_log.get_mut(unit).ok_or(Error::DimensionMismatch {
            what: "unit index",
            expected: self.outcomes.n(),
            got: unit,
        })?;
        match slot {
            Some(prev) if *prev != arm => return Err(Error::OracleViolation { unit }),
            _ => *slot = Some(arm),
        }
        Ok(match arm {
            Arm::Treatment => self.outcomes.y1[unit],
            Arm::Control => self.outcomes.y0[unit],
        })
    }

    pub fn access_log(&self) -> &[Option<Arm>] {
        &self.access_log
    }

    pub fn is_fresh(&self) -> bool {
        self.access_log.iter().all(Option::is_none)
    }

    /// Number of units with any arm revealed.
    pub fn revealed_count(&self) -> usize {
        self.access_log.iter().filter(|a| a.is_some()).count()
    }

    pub fn revealed(&self, arm: Arm) -> Vec<usize> {
        self.access_log
            .iter()
            .enumerate()
            .filter(|(_, a)| **a == Some(arm))
            .map(|(j, _)| j)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_arm_is_rejected() {
        let po = PotentialOutcomes::new(
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![0.0, 1.0]),
        )
        .unwrap();
        let mut o = po.oracle();
        assert!(o.is_fresh());
        assert_eq!(o.reveal(0, Arm::Treatment).unwrap(), 1.0);
        assert_eq!(o.reveal(0, Arm::Treatment).unwrap(), 1.0);
        assert!(matches!(
            o.reveal(0, Arm::Control),
            Err(Error::OracleViolation { unit: 0 })
        ));
        assert_eq!(o.reveal(1, Arm::Control).unwrap(), 1.0);
        assert_eq!(o.revealed_count(), 2);
        assert_eq!(o.revealed(Arm::Control), vec![1]);
    }

    #[test]
    fn constant_shift_ate() {
        let po = PotentialOutcomes::constant_shift(DVector::from_vec(vec![3.0, -1.0, 4.0]), 2.5);
        assert_eq!(po.ate(), 2.5);
    }
}
