//! Scalar time signals used to parameterize built-in sets and fields.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// A scalar function of time with known a.e. derivative and total variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Signal {
    Constant {
        value: f64,
    },
    /// `value + slope * t`
    Linear {
        value: f64,
        slope: f64,
    },
    /// `offset + amplitude * sin(omega * t + phase)`
    Sine {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + amplitude` on the first half of each period, `offset - amplitude`
    /// on the second. Bounded variation but not absolutely continuous.
    SquareWave {
        amplitude: f64,
        period: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl Signal {
    pub fn constant(value: f64) -> Self {
        Signal::Constant { value }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Signal::Constant { value } => value,
            Signal::Linear { value, slope } => value + slope * t,
            Signal::Sine {
                amplitude,
                omega,
                phase,
                offset,
            } => offset + amplitude * (omega * t + phase).sin(),
            Signal::SquareWave {
                amplitude,
                period,
                offset,
            } => {
                let frac = (t / period).rem_euclid(1.0);
                if frac < 0.5 {
                    offset + amplitude
                } else {
                    offset - amplitude
                }
            }
        }
    }

    /// Almost-everywhere derivative.
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            Signal::Constant { .. } | Signal::SquareWave { .. } => 0.0,
            Signal::Linear { slope, .. } => slope,
            Signal::Sine {
                amplitude,
                omega,
                phase,
                ..
            } => amplitude * omega * (omega * t + phase).cos(),
        }
    }

    /// `V(t) = int_0^t |rate|`, monotone in `t`. `None` when the signal is not
    /// absolutely continuous.
    pub fn cumulative_variation(&self, t: f64) -> Option<f64> {
        match *self {
            Signal::Constant { .. } => Some(0.0),
            Signal::Linear { slope, .. } => Some(slope.abs() * t),
            Signal::Sine {
                amplitude,
                omega,
                phase,
                ..
            } => {
                let (w, p) = if omega >= 0.0 { (omega, phase) } else { (-omega, -phase) };
                Some(amplitude.abs() * (sine_variation(w * t + p) - sine_variation(p)))
            }
            Signal::SquareWave { .. } => None,
        }
    }

    pub fn is_absolutely_continuous(&self) -> bool {
        !matches!(self, Signal::SquareWave { .. })
    }

    /// An upper bound of `|value|` on `[t0, t1]`.
    pub fn sup_abs(&self, t0: f64, t1: f64) -> f64 {
        match *self {
            Signal::Constant { value } => value.abs(),
            Signal::Linear { .. } => self.value(t0).abs().max(self.value(t1).abs()),
            Signal::Sine { amplitude, offset, .. } | Signal::SquareWave { amplitude, offset, .. } => {
                offset.abs() + amplitude.abs()
            }
        }
    }
}

/// Total variation of `sin` on `[0, theta]`, extended as an odd function.
fn sine_variation(theta: f64) -> f64 {
    if theta < 0.0 {
        return -sine_variation(-theta);
    }
    let quarters = (theta / FRAC_PI_2).floor();
    let anchor = (quarters * FRAC_PI_2).sin();
    quarters + (theta.sin() - anchor).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn variation_by_sampling(s: &Signal, t0: f64, t1: f64, n: usize) -> f64 {
        let h = (t1 - t0) / n as f64;
        (0..n)
            .map(|k| (s.value(t0 + (k + 1) as f64 * h) - s.value(t0 + k as f64 * h)).abs())
            .sum()
    }

    #[test]
    fn sine_variation_matches_sampled_total_variation() {
        let s = Signal::Sine {
            amplitude: 0.7,
            omega: 3.0,
            phase: 0.4,
            offset: 1.0,
        };
        for &(a, b) in &[(0.0, 1.0), (0.3, 4.1), (-1.0, 2.5)] {
            let exact = s.cumulative_variation(b).unwrap() - s.cumulative_variation(a).unwrap();
            assert_abs_diff_eq!(exact, variation_by_sampling(&s, a, b, 200_000), epsilon = 1e-6);
        }
    }

    #[test]
    fn negative_frequency_is_handled() {
        let s = Signal::Sine {
            amplitude: 1.0,
            omega: -2.0,
            phase: 0.3,
            offset: 0.0,
        };
        let v = s.cumulative_variation(2.0).unwrap();
        assert_abs_diff_eq!(v, variation_by_sampling(&s, 0.0, 2.0, 200_000), epsilon = 1e-6);
    }

    #[test]
    fn square_wave_levels_and_jump_convention() {
        let s = Signal::SquareWave {
            amplitude: 1.0,
            period: 1.0,
            offset: 0.0,
        };
        assert_eq!(s.value(0.0), 1.0);
        assert_eq!(s.value(0.49), 1.0);
        assert_eq!(s.value(0.5), -1.0);
        assert_eq!(s.value(1.0), 1.0);
        assert!(s.cumulative_variation(1.0).is_none());
    }
}
