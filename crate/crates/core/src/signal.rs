//! Inputs with analytic derivatives.
//!
//! Every check on the extended system consumes `u` together with a number of
//! its time derivatives. Those derivatives are evaluated in closed form from a
//! small set of primitives rather than by finite differences.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// An input `u: ℝ → ℝ^p` together with its derivatives up to `max_order`.
pub trait SmoothSignal: Send + Sync {
    /// Number of input channels `p`.
    fn dim(&self) -> usize;

    /// Highest derivative order the signal will answer for.
    fn max_order(&self) -> usize;

    /// `u^{(order)}(t)`. Callers must keep `order <= max_order()`.
    fn derivative(&self, t: f64, order: usize) -> DVector<f64>;

    fn value(&self, t: f64) -> DVector<f64> {
        self.derivative(t, 0)
    }
}

/// Scalar building block with exact derivative rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    Constant {
        value: f64,
    },
    /// `Σ c_j t^j`, lowest degree first.
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// `amplitude · sin(frequency · t + phase)`.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude · cos(frequency · t + phase)`.
    Cosine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Primitive {
    pub fn sin(amplitude: f64, frequency: f64) -> Self {
        Primitive::Sinusoid {
            amplitude,
            frequency,
            phase: 0.0,
        }
    }

    pub fn cos(amplitude: f64, frequency: f64) -> Self {
        Primitive::Cosine {
            amplitude,
            frequency,
            phase: 0.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        Primitive::Constant { value }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Primitive::Constant { value } => value.is_finite(),
            Primitive::Polynomial { coefficients } => coefficients.iter().all(|c| c.is_finite()),
            Primitive::Sinusoid {
                amplitude,
                frequency,
                phase,
            }
            | Primitive::Cosine {
                amplitude,
                frequency,
                phase,
            } => amplitude.is_finite() && frequency.is_finite() && phase.is_finite(),
        }
    }

    /// Exact first derivative as another primitive.
    pub fn differentiate(&self) -> Primitive {
        match self {
            Primitive::Constant { .. } => Primitive::Constant { value: 0.0 },
            Primitive::Polynomial { coefficients } => Primitive::Polynomial {
                coefficients: coefficients
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(j, c)| c * j as f64)
                    .collect(),
            },
            Primitive::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => Primitive::Cosine {
                amplitude: amplitude * frequency,
                frequency: *frequency,
                phase: *phase,
            },
            Primitive::Cosine {
                amplitude,
                frequency,
                phase,
            } => Primitive::Sinusoid {
                amplitude: -amplitude * frequency,
                frequency: *frequency,
                phase: *phase,
            },
        }
    }

    pub fn derivative(&self, t: f64, order: usize) -> f64 {
        match self {
            Primitive::Constant { value } => {
                if order == 0 {
                    *value
                } else {
                    0.0
                }
            }
            Primitive::Polynomial { coefficients } => {
                let mut acc = 0.0;
                // Horner over the differentiated coefficients
                for (j, c) in coefficients.iter().enumerate().skip(order).rev() {
                    let falling: f64 = ((j - order + 1)..=j).map(|f| f as f64).product();
                    acc = acc * t + c * falling;
                }
                acc
            }
            Primitive::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => {
                amplitude
                    * frequency.powi(order as i32)
                    * quarter_turn(frequency * t + phase, order)
            }
            Primitive::Cosine {
                amplitude,
                frequency,
                phase,
            } => {
                amplitude
                    * frequency.powi(order as i32)
                    * quarter_turn(frequency * t + phase, order + 1)
            }
        }
    }
}

// sin(x + k·π/2) without rounding π/2
fn quarter_turn(x: f64, k: usize) -> f64 {
    match k % 4 {
        0 => x.sin(),
        1 => x.cos(),
        2 => -x.sin(),
        _ => -x.cos(),
    }
}

/// Vector signal whose channels are sums of [`Primitive`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveSignal {
    channels: Vec<Vec<Primitive>>,
    max_order: usize,
}

impl PrimitiveSignal {
    pub fn new(channels: Vec<Vec<Primitive>>, max_order: usize) -> Self {
        Self {
            channels,
            max_order,
        }
    }

    /// `u ≡ 0` with `p` channels.
    pub fn zero(p: usize, max_order: usize) -> Self {
        Self::new(vec![Vec::new(); p], max_order)
    }

    /// `u ≡ value`.
    pub fn constant(value: &[f64], max_order: usize) -> Self {
        Self::new(
            value
                .iter()
                .map(|&v| vec![Primitive::constant(v)])
                .collect(),
            max_order,
        )
    }

    pub fn channels(&self) -> &[Vec<Primitive>] {
        &self.channels
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self
    }

    /// Channel-wise exact derivative; constants are dropped.
    pub fn differentiate(&self) -> PrimitiveSignal {
        let channels = self
            .channels
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .filter(|p| !matches!(p, Primitive::Constant { .. }))
                    .map(Primitive::differentiate)
                    .collect()
            })
            .collect();
        Self::new(channels, self.max_order.saturating_sub(1))
    }

    pub fn is_finite(&self) -> bool {
        self.channels.iter().flatten().all(Primitive::is_finite)
    }
}

impl SmoothSignal for PrimitiveSignal {
    fn dim(&self) -> usize {
        self.channels.len()
    }

    fn max_order(&self) -> usize {
        self.max_order
    }

    fn derivative(&self, t: f64, order: usize) -> DVector<f64> {
        DVector::from_iterator(
            self.channels.len(),
            self.channels
                .iter()
                .map(|terms| terms.iter().map(|p| p.derivative(t, order)).sum()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn polynomial_derivatives() {
        // 1 + 2t + 3t² + 4t³
        let p = Primitive::Polynomial {
            coefficients: vec![1.0, 2.0, 3.0, 4.0],
        };
        let t = 0.5;
        assert_eq!(p.derivative(t, 0), 1.0 + 1.0 + 0.75 + 0.5);
        assert_eq!(p.derivative(t, 1), 2.0 + 3.0 + 3.0);
        assert_eq!(p.derivative(t, 2), 6.0 + 12.0);
        assert_eq!(p.derivative(t, 3), 24.0);
        assert_eq!(p.derivative(t, 4), 0.0);
    }

    #[test]
    fn sinusoid_cycle() {
        let s = Primitive::cos(-20.0, 1.0);
        let t = 0.3f64;
        assert!((s.derivative(t, 0) + 20.0 * t.cos()).abs() < 1e-14);
        assert!((s.derivative(t, 1) - 20.0 * t.sin()).abs() < 1e-14);
        assert!((s.derivative(t, 2) - 20.0 * t.cos()).abs() < 1e-14);
        assert!((s.derivative(t, 4) + 20.0 * t.cos()).abs() < 1e-13);
    }

    #[test]
    fn zero_and_constant_signals() {
        let z = PrimitiveSignal::zero(3, 4);
        assert_eq!(z.derivative(1.0, 2), DVector::zeros(3));
        let c = PrimitiveSignal::constant(&[1.0, 2.0], 3);
        assert_eq!(c.value(7.0), DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(c.derivative(7.0, 1), DVector::zeros(2));
    }

    #[test]
    fn primitive_toml_shape() {
        #[derive(Deserialize)]
        struct Doc {
            terms: Vec<Primitive>,
        }
        let doc: Doc = toml::from_str(
            r#"terms = [
                { kind = "sinusoid", amplitude = 2.0, frequency = 3.0 },
                { kind = "polynomial", coefficients = [1.0, 0.0, 2.0] },
            ]"#,
        )
        .unwrap();
        assert_eq!(doc.terms[0], Primitive::sin(2.0, 3.0));
        let bad: Result<Doc, _> =
            toml::from_str(r#"terms = [{ kind = "constant", value = 1.0, extra = 2 }]"#);
        assert!(bad.is_err());
    }

    #[test]
    fn differentiate_is_exact() {
        let sig = PrimitiveSignal::new(
            vec![
                vec![Primitive::cos(20.0, 1.0), Primitive::constant(-20.0)],
                vec![
                    Primitive::sin(10.0, 2.0),
                    Primitive::Polynomial {
                        coefficients: vec![1.0, 2.0, 3.0],
                    },
                ],
            ],
            6,
        );
        let d2 = sig.differentiate().differentiate();
        assert_eq!(d2.max_order(), 4);
        for &t in &[0.0, 0.4, 3.3] {
            for order in 0..3 {
                let a = d2.derivative(t, order);
                let b = sig.derivative(t, order + 2);
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    proptest! {
        // analytic derivative agrees with a central difference of the order below
        #[test]
        fn derivative_matches_finite_difference(
            a in -5.0f64..5.0, w in 0.1f64..4.0, phase in -3.0f64..3.0,
            t in -2.0f64..2.0, order in 0usize..5,
        ) {
            let p = Primitive::Sinusoid { amplitude: a, frequency: w, phase };
            let h = 1e-5;
            let fd = (p.derivative(t + h, order) - p.derivative(t - h, order)) / (2.0 * h);
            let exact = p.derivative(t, order + 1);
            let scale = a.abs() * w.powi(order as i32 + 3) + 1.0;
            prop_assert!((fd - exact).abs() <= 1e-6 * scale);
        }
    }
}
