//! Convolutional absorbing layers: the spatial derivative `∂_u f` is replaced
//! by `∂_u f + ψ`, with `ψ ← b ψ + a ∂_u f` inside the layer.

/// Grading order of the conductivity profile.
pub const ORDER: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Cpml {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

impl Cpml {
    /// Coefficients at positions `p + offset` for `p in 0..count`, with
    /// `layers` cells of grading at both ends of an axis of `cells` cells.
    pub fn new(count: usize, offset: f64, cells: usize, layers: usize, delta: f64, dt: f64, velocity: f64, omega: f64) -> Self {
        let sigma_max = 0.8 * (ORDER + 1) as f64 * velocity / delta;
        let alpha_max = 0.1 * omega;
        let mut b = vec![1.0; count];
        let mut a = vec![0.0; count];
        if layers == 0 {
            return Self { b, a };
        }
        let l = layers as f64;
        let right = (cells - layers) as f64;
        for p in 0..count {
            let x = p as f64 + offset;
            let depth = if x < l {
                (l - x) / l
            } else if x > right {
                (x - right) / l
            } else {
                continue;
            };
            let depth = depth.min(1.0);
            let sigma = sigma_max * depth.powi(ORDER);
            let alpha = alpha_max * (1.0 - depth);
            b[p] = (-(sigma + alpha) * dt).exp();
            if sigma > 0.0 {
                a[p] = sigma / (sigma + alpha) * (b[p] - 1.0);
            }
        }
        Self { b, a }
    }

    pub fn is_active(&self, p: usize) -> bool {
        self.a[p] != 0.0 || self.b[p] != 1.0
    }
}
