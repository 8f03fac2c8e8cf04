//! Real fully-normalized spherical harmonics without the Condon-Shortley phase.
//!
//! Coefficients are indexed as (n, m) -> n^2 + n + m, i.e. the order
//! (0,0), (1,-1), (1,0), (1,1), (2,-2), ... used for all HOA vectors in the
//! crate. With this normalization the squared norm of a basis vector equals
//! sum_n (2n+1)/(4 pi) for every direction (addition theorem at zero
//! separation).

use crate::geometry::Direction;

/// Flat index of degree `n`, order `m` (|m| <= n).
pub fn nm_index(n: usize, m: i64) -> usize {
    debug_assert!(m.unsigned_abs() as usize <= n);
    ((n * n + n) as i64 + m) as usize
}

/// Number of coefficients for spherical-harmonic order `n_max`.
pub fn coeff_count(n_max: usize) -> usize {
    (n_max + 1) * (n_max + 1)
}

/// Associated Legendre values P_n^m(x) for all n <= n_max, m <= n, without the
/// Condon-Shortley phase. Returned flat with index n*(n+1)/2 + m.
fn legendre_table(n_max: usize, x: f64) -> Vec<f64> {
    let idx = |n: usize, m: usize| n * (n + 1) / 2 + m;
    let mut p = vec![0.0; (n_max + 1) * (n_max + 2) / 2];
    let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    p[idx(0, 0)] = 1.0;
    // Diagonal: P_m^m = (2m-1)!! (1-x^2)^{m/2}.
    for m in 1..=n_max {
        p[idx(m, m)] = p[idx(m - 1, m - 1)] * (2.0 * m as f64 - 1.0) * somx2;
    }
    // First superdiagonal: P_{m+1}^m = x (2m+1) P_m^m.
    for m in 0..n_max {
        p[idx(m + 1, m)] = x * (2.0 * m as f64 + 1.0) * p[idx(m, m)];
    }
    // Upward in n: (n-m) P_n^m = x (2n-1) P_{n-1}^m - (n+m-1) P_{n-2}^m.
    for m in 0..=n_max {
        for n in (m + 2)..=n_max {
            let nf = n as f64;
            let mf = m as f64;
            p[idx(n, m)] = (x * (2.0 * nf - 1.0) * p[idx(n - 1, m)]
                - (nf + mf - 1.0) * p[idx(n - 2, m)])
                / (nf - mf);
        }
    }
    p
}

/// Real spherical-harmonic basis vector of order `n_max` for a direction.
pub fn sh_basis(n_max: usize, dir: Direction) -> Vec<f64> {
    let az = dir.azimuth_deg.to_radians();
    let u = dir.elevation_deg.to_radians().sin();
    let p = legendre_table(n_max, u);
    let pidx = |n: usize, m: usize| n * (n + 1) / 2 + m;

    let mut y = vec![0.0; coeff_count(n_max)];
    for n in 0..=n_max {
        for m in 0..=n {
            // Normalization sqrt((2n+1)/(4 pi) (n-m)!/(n+m)!).
            let mut ratio = 1.0;
            for k in (n - m + 1)..=(n + m) {
                ratio /= k as f64;
            }
            let norm = ((2.0 * n as f64 + 1.0) / (4.0 * std::f64::consts::PI) * ratio).sqrt();
            let pnm = p[pidx(n, m)];
            if m == 0 {
                y[n * n + n] = norm * pnm;
            } else {
                let s = std::f64::consts::SQRT_2 * norm * pnm;
                y[n * n + n + m] = s * (m as f64 * az).cos();
                y[n * n + n - m] = s * (m as f64 * az).sin();
            }
        }
    }
    y
}

/// Legendre polynomial P_n(x).
pub fn legendre(n: usize, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut pm2, mut pm1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p = ((2.0 * kf - 1.0) * x * pm1 - (kf - 1.0) * pm2) / kf;
                pm2 = pm1;
                pm1 = p;
            }
            pm1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn y00_is_inverse_sqrt_4pi() {
        for dir in [
            Direction::new(0.0, 0.0),
            Direction::new(123.0, -45.0),
            Direction::new(301.0, 88.0),
        ] {
            let y = sh_basis(0, dir);
            assert_relative_eq!(y[0], 0.2820948, epsilon = 1e-7);
        }
    }

    #[test]
    fn y10_at_zenith() {
        let y = sh_basis(1, Direction::new(0.0, 90.0));
        assert_relative_eq!(y[2], 0.4886025, epsilon = 1e-7);
        assert_relative_eq!(y[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(y[3], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn first_order_components_are_scaled_unit_vector() {
        // (Y_1^-1, Y_1^0, Y_1^1) = sqrt(3/4pi) (uy, uz, ux).
        let dir = Direction::new(40.0, 25.0);
        let u = dir.unit_vector();
        let y = sh_basis(1, dir);
        let c = (3.0 / (4.0 * PI)).sqrt();
        assert_relative_eq!(y[1], c * u.y, epsilon = 1e-12);
        assert_relative_eq!(y[2], c * u.z, epsilon = 1e-12);
        assert_relative_eq!(y[3], c * u.x, epsilon = 1e-12);
    }

    /// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let p = legendre(n, x);
                // Derivative from the standard relation.
                let dp = n as f64 * (x * legendre(n, x) - legendre(n - 1, x)) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let dp = n as f64 * (x * legendre(n, x) - legendre(n - 1, x)) / (x * x - 1.0);
            out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        out
    }

    #[test]
    fn orthonormality_by_quadrature() {
        // Gauss-Legendre in cos(colatitude) x uniform azimuth integrates
        // products of order <= 4 harmonics exactly up to rounding.
        let n_max = 4;
        let dim = coeff_count(n_max);
        let nodes = gauss_legendre(12);
        let n_az = 24;
        let mut gram = vec![0.0; dim * dim];
        for (u, w) in &nodes {
            let el = u.asin().to_degrees();
            for k in 0..n_az {
                let az = 360.0 * k as f64 / n_az as f64;
                let y = sh_basis(n_max, Direction::new(az, el));
                let wq = w * (2.0 * PI / n_az as f64);
                for i in 0..dim {
                    for j in 0..dim {
                        gram[i * dim + j] += wq * y[i] * y[j];
                    }
                }
            }
        }
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[i * dim + j] - expect).abs() < 1e-8,
                    "gram[{i},{j}] = {}",
                    gram[i * dim + j]
                );
            }
        }
    }

    #[test]
    fn addition_theorem_pair() {
        // sum_m Y_nm(a) Y_nm(b) = (2n+1)/(4pi) P_n(cos angle).
        let a = Direction::new(75.0, 33.0);
        let b = Direction::new(290.0, -51.0);
        let cosg = a.unit_vector().dot(b.unit_vector());
        let ya = sh_basis(4, a);
        let yb = sh_basis(4, b);
        for n in 0..=4usize {
            let sum: f64 = (-(n as i64)..=n as i64)
                .map(|m| ya[nm_index(n, m)] * yb[nm_index(n, m)])
                .sum();
            let expect = (2.0 * n as f64 + 1.0) / (4.0 * PI) * legendre(n, cosg);
            assert_relative_eq!(sum, expect, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn basis_norm_is_direction_independent(az in 0.0f64..360.0, el in -90.0f64..90.0) {
            let y = sh_basis(4, Direction::new(az, el));
            let norm2: f64 = y.iter().map(|v| v * v).sum();
            let expect: f64 = (0..=4).map(|n| (2.0 * n as f64 + 1.0) / (4.0 * PI)).sum();
            prop_assert!((norm2 - expect).abs() < 1e-9);
        }
    }
}
