//! Standard bivariate normal upper orthant `P(X >= h, Y >= k)`.
//!
//! Drezner-Wesolowsky with Genz's double-precision refinements, including the
//! asymptotic expansion used for `|r| >= 0.925`. Used for strongly correlated
//! pairs, where the conditional quadrature loses its smooth integrand.
#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

use super::std_cdf;

// Half of the symmetric Gauss-Legendre rules: (weight, negative node).
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705e+00, -0.9324695142031522e+00),
    (0.3607615730481384e+00, -0.6612093864662647e+00),
    (0.4679139345726904e+00, -0.2386191860831970e+00),
];

const GL12: [(f64, f64); 6] = [
    (0.4717533638651177e-01, -0.9815606342467191e+00),
    (0.1069393259953183e+00, -0.9041172563704750e+00),
    (0.1600783285433464e+00, -0.7699026741943050e+00),
    (0.2031674267230659e+00, -0.5873179542866171e+00),
    (0.2334925365383547e+00, -0.3678314989981802e+00),
    (0.2491470458134029e+00, -0.1252334085114692e+00),
];

const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-01, -0.9931285991850949e+00),
    (0.4060142980038694e-01, -0.9639719272779138e+00),
    (0.6267204833410906e-01, -0.9122344282513259e+00),
    (0.8327674157670475e-01, -0.8391169718222188e+00),
    (0.1019301198172404e+00, -0.7463319064601508e+00),
    (0.1181945319615184e+00, -0.6360536807265150e+00),
    (0.1316886384491766e+00, -0.5108670019508271e+00),
    (0.1420961093183821e+00, -0.3737060887154196e+00),
    (0.1491729864726037e+00, -0.2277858511416451e+00),
    (0.1527533871307259e+00, -0.7652652113349733e-01),
];

fn phi_upper(x: f64) -> f64 {
    std_cdf(-x)
}

/// `P(X >= h, Y >= k)` for standard normals with correlation `r`.
pub fn bvn_upper_std(h: f64, k: f64, r: f64) -> f64 {
    let r = r.clamp(-1.0, 1.0);
    let rule: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let two_pi = 2.0 * PI;
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;

    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = r.asin();
        for &(w, x) in rule {
            for s in [-1.0, 1.0] {
                let sn = (0.5 * asr * (s * x + 1.0)).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return (bvn * asr / (2.0 * two_pi) + phi_upper(h) * phi_upper(k)).clamp(0.0, 1.0);
    }

    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let e = -0.5 * (b_s / a_s + hk);
        if e > -100.0 {
            bvn = a
                * e.exp()
                * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        }
        if hk > -160.0 {
            let b = b_s.sqrt();
            bvn -= (-0.5 * hk).exp()
                * two_pi.sqrt()
                * phi_upper(b / a)
                * b
                * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a *= 0.5;
        for &(w, x) in rule {
            for s in [-1.0, 1.0] {
                let xs = (a * (s * x + 1.0)).powi(2);
                let rs = (1.0 - xs).sqrt();
                let e = -0.5 * (b_s / xs + hk);
                if e > -100.0 {
                    bvn += a
                        * w
                        * e.exp()
                        * ((-hk * xs / (2.0 * (1.0 + rs).powi(2))).exp() / rs
                            - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / two_pi;
    }
    if r > 0.0 {
        bvn += phi_upper(h.max(k));
    } else {
        bvn = -bvn;
        if k > h {
            if h < 0.0 {
                bvn += std_cdf(k) - std_cdf(h);
            } else {
                bvn += phi_upper(h) - phi_upper(k);
            }
        }
    }
    bvn.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthant_closed_form() {
        for r in [-0.99, -0.95, -0.5, -0.1, 0.0, 0.2, 0.5, 0.8, 0.93, 0.999] {
            let want = 0.25 + f64::asin(r) / (2.0 * PI);
            assert!((bvn_upper_std(0.0, 0.0, r) - want).abs() < 1e-14, "r={r}");
        }
    }

    #[test]
    fn comonotone_limits() {
        assert!((bvn_upper_std(0.0, -5.0, 1.0) - 0.5).abs() < 1e-6);
        assert!((bvn_upper_std(0.3, 1.1, 1.0) - phi_upper(1.1)).abs() < 1e-15);
        // countermonotone: P(X >= h, -X >= k) = max(0, Phi(-k) - Phi(h))
        assert!((bvn_upper_std(-1.0, -0.5, -1.0) - (std_cdf(0.5) - std_cdf(-1.0))).abs() < 1e-15);
        assert_eq!(bvn_upper_std(1.0, 0.5, -1.0), 0.0);
    }

    #[test]
    fn independent_factorizes() {
        let v = bvn_upper_std(0.4, -1.3, 0.0);
        assert!((v - phi_upper(0.4) * phi_upper(-1.3)).abs() < 1e-15);
    }
}
