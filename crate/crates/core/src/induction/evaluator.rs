//! Pointwise evaluation of `g = s_{r⁺} − u_{r⁻}` on one critical arc.
//!
//! Without a resonance the value is only known modulo π and the caller
//! unwraps it. With a resonance of length `k` the product on one side is
//! split as `A_{r−k}(x ± kα)·A_{±k}(x)`; the direction on that side is then
//! the Möbius image of a slowly varying direction under `A_{±k}(x)⁻¹`, and
//! the lifted action gives a continuous branch even when the step it makes
//! is far narrower than any sampling can resolve.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::cocycle::{orbit_point, transfer, QpCocycle, TransferResult};
use crate::error::Result;
use crate::sl2::{mobius_lift, PolarForm};

/// Which side of the product carries the resonance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    None,
    /// Forward orbit hits the other arc after `k` steps.
    Stable(u64),
    /// Backward orbit hits the other arc after `k` steps.
    Unstable(u64),
}

impl Split {
    /// The split for arc `j ∈ {0, 1}` given a resonance
    /// `(I₀ + kα) ∩ I₁ ≠ ∅`.
    pub fn for_arc(k: i64, j: usize) -> Split {
        let forward = (k > 0) == (j == 0);
        let m = k.unsigned_abs();
        if forward {
            Split::Stable(m)
        } else {
            Split::Unstable(m)
        }
    }
}

/// Raw data at one point.
#[derive(Debug, Clone, Copy)]
pub struct Pieces {
    /// `s_{r⁺}` and `u_{r⁻}` in `[0, π)`.
    pub s: f64,
    pub u: f64,
    pub log_plus: f64,
    pub log_minus: f64,
    /// For a split: the polar data of `A_{±k}(x)⁻¹`, its `u` angle and the
    /// offset `θ + π/2 − s(A_{±k}(x)⁻¹)` fed to the lifted action.
    pub split: Option<(PolarForm, f64, f64)>,
}

/// One evaluated point of a lifted gap curve.
#[derive(Debug, Clone, Copy)]
pub struct GapPoint {
    pub g: f64,
    /// The step factor and the background of the type III decomposition;
    /// both zero without a split.
    pub f1: f64,
    pub f2: f64,
    /// `‖A_{±k}(x)‖`, or 1 without a split.
    pub l: f64,
    pub log_plus: f64,
    pub log_minus: f64,
}

pub struct GapEvaluator<'a> {
    pub c: &'a QpCocycle,
    pub r_plus: u64,
    pub r_minus: u64,
    pub split: Split,
    refs: (f64, f64, f64),
}

fn nearest(v: f64, reference: f64) -> f64 {
    v + PI * ((reference - v) / PI).round()
}

fn join(later: &TransferResult, earlier: &TransferResult) -> Result<PolarForm> {
    let m = later.normalized * earlier.normalized;
    PolarForm::from_scaled(&m, later.log_norm + earlier.log_norm, 0.0)
}

impl<'a> GapEvaluator<'a> {
    /// Fixes the branch references at `center`.
    pub fn new(c: &'a QpCocycle, r_plus: u64, r_minus: u64, split: Split, center: f64) -> Result<Self> {
        let mut e = GapEvaluator { c, r_plus, r_minus, split, refs: (0.0, 0.0, 0.0) };
        let p = e.pieces(center)?;
        e.refs = match (split, p.split) {
            (Split::Stable(_), Some((_, um, psi))) => (p.u, um, psi),
            (Split::Unstable(_), Some((_, um, psi))) => (p.s, um, psi),
            _ => (0.0, 0.0, 0.0),
        };
        Ok(e)
    }

    pub fn is_split(&self) -> bool {
        self.split != Split::None
    }

    pub fn pieces(&self, x: f64) -> Result<Pieces> {
        let c = self.c;
        let alpha = c.alpha;
        match self.split {
            Split::None => {
                let fwd = transfer(c, x, self.r_plus as i64)?;
                let bwd = transfer(c, x, -(self.r_minus as i64))?;
                Ok(Pieces {
                    s: fwd.polar()?.s.value(),
                    u: bwd.polar()?.s.value(),
                    log_plus: fwd.log_norm,
                    log_minus: bwd.log_norm,
                    split: None,
                })
            }
            Split::Stable(k) => {
                let head = transfer(c, x, k as i64)?;
                let tail = transfer(c, orbit_point(x, k as i64, alpha), (self.r_plus - k) as i64)?;
                let full = join(&tail, &head)?;
                let m = head.polar()?.inverse();
                let theta = tail.polar()?.s.value();
                let bwd = transfer(c, x, -(self.r_minus as i64))?;
                Ok(Pieces {
                    s: full.s.value(),
                    u: bwd.polar()?.s.value(),
                    log_plus: full.log_norm,
                    log_minus: bwd.log_norm,
                    split: Some((m, m.u.value(), theta + FRAC_PI_2 - m.s.value())),
                })
            }
            Split::Unstable(k) => {
                let head = transfer(c, x, -(k as i64))?;
                let tail = transfer(c, orbit_point(x, -(k as i64), alpha), -((self.r_minus - k) as i64))?;
                let full = join(&tail, &head)?;
                let m = head.polar()?.inverse();
                let theta = tail.polar()?.s.value();
                let fwd = transfer(c, x, self.r_plus as i64)?;
                Ok(Pieces {
                    s: fwd.polar()?.s.value(),
                    u: full.s.value(),
                    log_plus: fwd.log_norm,
                    log_minus: full.log_norm,
                    split: Some((m, m.u.value(), theta + FRAC_PI_2 - m.s.value())),
                })
            }
        }
    }

    /// The gap at `x`: modulo π without a split, lifted with one.
    pub fn eval(&self, x: f64) -> Result<GapPoint> {
        let p = self.pieces(x)?;
        let Some((m, um, psi)) = p.split else {
            return Ok(GapPoint {
                g: p.s - p.u,
                f1: 0.0,
                f2: 0.0,
                l: 1.0,
                log_plus: p.log_plus,
                log_minus: p.log_minus,
            });
        };
        let (side_ref, um_ref, psi_ref) = self.refs;
        let um = nearest(um, um_ref);
        let psi = nearest(psi, psi_ref);
        let lift = mobius_lift(&m, um, psi);
        let l = m.log_norm.exp();
        let (g, f1, f2) = if matches!(self.split, Split::Stable(_)) {
            let s = nearest(p.s, lift);
            let u = nearest(p.u, side_ref);
            // s = um + F(ψ) with F ≡ atan(l² tan(ψ − π/2)) − π/2 (mod π)
            (s - u, psi - FRAC_PI_2, um - u + (s - lift))
        } else {
            let u = nearest(p.u, lift);
            let s = nearest(p.s, side_ref);
            (s - u, FRAC_PI_2 - psi, s - um - (u - lift))
        };
        Ok(GapPoint { g, f1, f2, l, log_plus: p.log_plus, log_minus: p.log_minus })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::GOLDEN;
    use crate::cocycle::Potential;
    use crate::sl2::{dist_to_zero, wrap_half};

    #[test]
    fn split_arc_assignment() {
        assert_eq!(Split::for_arc(2, 0), Split::Stable(2));
        assert_eq!(Split::for_arc(2, 1), Split::Unstable(2));
        assert_eq!(Split::for_arc(-3, 0), Split::Unstable(3));
        assert_eq!(Split::for_arc(-3, 1), Split::Stable(3));
    }

    #[test]
    fn split_agrees_with_plain_modulo_pi() {
        let c = QpCocycle::reduced(GOLDEN, 0.36, 1e3, Potential::cos());
        for split in [Split::Stable(1), Split::Unstable(1)] {
            let plain = GapEvaluator::new(&c, 40, 40, Split::None, 0.19).unwrap();
            let lifted = GapEvaluator::new(&c, 40, 40, split, 0.19).unwrap();
            for k in 0..20 {
                let x = 0.185 + 0.0005 * k as f64;
                let a = plain.eval(x).unwrap();
                let b = lifted.eval(x).unwrap();
                assert!(wrap_half(a.g - b.g).abs() < 1e-9, "{split:?} {x}");
                let composed = (b.l * b.l * b.f1.tan()).atan() - FRAC_PI_2 + b.f2;
                assert!(dist_to_zero(composed - b.g) < 1e-6, "{split:?} {x}");
            }
        }
    }
}
