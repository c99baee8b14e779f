//! Closed-form reflection and transmission of a static, homogeneous slab
//! under oblique TE incidence (Airy summation of the Fresnel coefficients).

use num_complex::Complex64;

/// Complex amplitude coefficients of a static slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryCoefficients {
    /// `E_y` reflection coefficient referenced at the front face.
    pub r: Complex64,
    /// `E_y` transmission coefficient referenced at the back face.
    pub t: Complex64,
}

impl AiryCoefficients {
    pub fn reflectance(&self) -> f64 {
        self.r.norm_sqr()
    }

    /// Same exterior on both sides, so no admittance ratio is needed.
    pub fn transmittance(&self) -> f64 {
        self.t.norm_sqr()
    }
}

/// TE slab of `(eps, mu)` and `thickness` in an `(eps_ext, mu_ext)` exterior,
/// lit at angle `theta_deg` from the slab plane's `z` axis.
pub fn static_slab(
    omega: f64,
    theta_deg: f64,
    eps: f64,
    mu: f64,
    thickness: f64,
    eps_ext: f64,
    mu_ext: f64,
) -> AiryCoefficients {
    let n_ext = (eps_ext * mu_ext).sqrt();
    let kz = omega * n_ext * theta_deg.to_radians().cos();
    let k1 = Complex64::new(omega * omega * eps_ext * mu_ext - kz * kz, 0.0).sqrt();
    let k2 = Complex64::new(omega * omega * eps * mu - kz * kz, 0.0).sqrt();
    let q1 = k1 / mu_ext;
    let q2 = k2 / mu;
    let r12 = (q1 - q2) / (q1 + q2);
    let phase = (Complex64::i() * k2 * thickness).exp();
    let denom = Complex64::new(1.0, 0.0) - r12 * r12 * phase * phase;
    AiryCoefficients {
        r: r12 * (Complex64::new(1.0, 0.0) - phase * phase) / denom,
        t: (Complex64::new(1.0, 0.0) - r12 * r12) * phase / denom,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_matched_slab_is_invisible() {
        let c = static_slab(1.3, 40.0, 1.0, 1.0, 2.5, 1.0, 1.0);
        assert!(c.r.norm() < 1e-15);
        assert!((c.transmittance() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn half_wave_slab_at_normal_incidence() {
        // theta = 90 deg is normal incidence; n d = lambda / 2 gives full transmission
        let eps: f64 = 4.0;
        let d = std::f64::consts::PI / (1.0 * eps.sqrt());
        let c = static_slab(1.0, 90.0, eps, 1.0, d, 1.0, 1.0);
        assert!(c.reflectance() < 1e-24);
    }

    #[test]
    fn quarter_wave_slab_reflectance() {
        // R = ((1 - n^2)/(1 + n^2))^2 for a quarter-wave layer
        let n: f64 = 2.0;
        let d = std::f64::consts::PI / (2.0 * n);
        let c = static_slab(1.0, 90.0, n * n, 1.0, d, 1.0, 1.0);
        let expect = ((1.0 - n * n) / (1.0 + n * n)).powi(2);
        assert!((c.reflectance() - expect).abs() < 1e-14);
    }

    #[test]
    fn lossless_slab_conserves_energy() {
        for &(th, eps, d) in &[(20.0, 3.0, 0.7), (75.0, 9.0, 4.1), (150.0, 1.5, 10.0)] {
            let c = static_slab(1.0, th, eps, 1.0, d, 1.0, 1.0);
            assert!((c.reflectance() + c.transmittance() - 1.0).abs() < 1e-13);
        }
    }
}
