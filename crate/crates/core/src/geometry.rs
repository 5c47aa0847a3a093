//! Array responses, path loss and the physical layout of APs, RISs and users.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::scalar::{expj, Cx, Real};

pub type Point3<T> = [T; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArrayKind {
    /// Uniform linear array; the elevation is fixed at π/2.
    Ula,
    /// Uniform planar array on an `(X_h, X_v)` grid.
    Uspa,
}

/// Steering vector of an `x`-element array. Entry `n` (0-based) has phase
/// `2π (d/λ) (⌊n / X_v⌋ sinϑᵃ sinϑᵉ + (n mod X_v) cosϑᵉ)`; a ULA is the
/// `(1, X)` grid with ϑᵉ = π/2.
pub fn array_response<T: Real>(
    x: usize,
    grid: (usize, usize),
    azimuth: T,
    elevation: T,
    d_over_lambda: T,
    kind: ArrayKind,
) -> Result<Vec<Cx<T>>> {
    if x == 0 {
        return invalid("array must have at least one element");
    }
    let (elevation, xv) = match kind {
        ArrayKind::Ula => (T::FRAC_PI_2(), 1usize),
        ArrayKind::Uspa => {
            if grid.0 * grid.1 != x || grid.0 == 0 {
                return invalid(format!("grid {}x{} does not match {} elements", grid.0, grid.1, x));
            }
            (elevation, grid.1)
        }
    };
    let k = T::TAU() * d_over_lambda;
    let row_step = azimuth.sin() * elevation.sin();
    let col_step = elevation.cos();
    Ok((0..x)
        .map(|n| {
            let row = T::from_usize(n / xv).unwrap();
            let col = T::from_usize(n % xv).unwrap();
            expj(k * (row * row_step + col * col_step))
        })
        .collect())
}

/// `reference_gain · distance^(−exponent)`.
pub fn path_loss<T: Real>(distance: T, exponent: T, reference_gain: T) -> Result<T> {
    if !(distance > T::zero()) {
        return invalid(format!("distance must be positive, got {distance}"));
    }
    Ok(reference_gain * distance.powf(-exponent))
}

pub fn distance<T: Real>(a: &Point3<T>, b: &Point3<T>) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum::<T>().sqrt()
}

/// Picks the RIS grid for `m` elements: the square grid when `m` is a perfect square.
pub fn square_grid(m: usize) -> Result<(usize, usize)> {
    let s = (m as f64).sqrt().round() as usize;
    if s * s == m {
        Ok((s, s))
    } else {
        invalid(format!(
            "{m} RIS elements do not form a square grid; give the grid explicitly"
        ))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemTopology<T> {
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub num_users: usize,
    pub num_ris: usize,
    pub elements_per_ris: usize,
    pub ris_grid: (usize, usize),
    pub d_over_lambda: T,
    pub ap_positions: Vec<Point3<T>>,
    pub ris_positions: Vec<Point3<T>>,
    pub user_positions: Vec<Point3<T>>,
}

impl<T: Real> SystemTopology<T> {
    pub fn validate(&self) -> Result<()> {
        if self.num_aps == 0 || self.antennas_per_ap == 0 || self.num_users == 0 {
            return invalid("J, N and K must be positive");
        }
        if self.elements_per_ris == 0 {
            return invalid("M must be positive");
        }
        if self.ris_grid.0 * self.ris_grid.1 != self.elements_per_ris {
            return invalid(format!(
                "RIS grid {}x{} does not match M = {}",
                self.ris_grid.0, self.ris_grid.1, self.elements_per_ris
            ));
        }
        if !(self.d_over_lambda > T::zero()) {
            return invalid("element spacing must be positive");
        }
        if self.ap_positions.len() != self.num_aps
            || self.ris_positions.len() != self.num_ris
            || self.user_positions.len() != self.num_users
        {
            return invalid("position lists do not match J, R, K");
        }
        let pairs = [
            (&self.ap_positions, &self.user_positions),
            (&self.ap_positions, &self.ris_positions),
            (&self.ris_positions, &self.user_positions),
        ];
        for (xs, ys) in pairs {
            for x in xs.iter() {
                for y in ys.iter() {
                    if !(distance(x, y) > T::zero()) {
                        return invalid("coincident nodes give zero path-loss distance");
                    }
                }
            }
        }
        Ok(())
    }
}

/// Box used when node positions are drawn at random.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacementBox<T> {
    pub width: T,
    pub depth: T,
    pub ap_height: T,
    pub user_height: T,
    pub ris_height: (T, T),
}

impl<T: Real> Default for PlacementBox<T> {
    fn default() -> Self {
        Self {
            width: T::lit(500.0),
            depth: T::lit(400.0),
            ap_height: T::zero(),
            user_height: T::zero(),
            ris_height: (T::lit(30.0), T::lit(400.0)),
        }
    }
}

impl<T: Real> PlacementBox<T> {
    fn unit<R: Rng + ?Sized>(rng: &mut R) -> T {
        T::lit(rng.random::<f64>())
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        num_aps: usize,
        num_ris: usize,
        num_users: usize,
    ) -> (Vec<Point3<T>>, Vec<Point3<T>>, Vec<Point3<T>>) {
        let ground = |h: T, rng: &mut R| [Self::unit(rng) * self.width, Self::unit(rng) * self.depth, h];
        let aps = (0..num_aps).map(|_| ground(self.ap_height, rng)).collect();
        let ris = (0..num_ris)
            .map(|_| {
                let h = self.ris_height.0 + Self::unit(rng) * (self.ris_height.1 - self.ris_height.0);
                ground(h, rng)
            })
            .collect();
        let users = (0..num_users).map(|_| ground(self.user_height, rng)).collect();
        (aps, ris, users)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathLossModel<T> {
    pub reference_gain: T,
    pub exponent_ap_user: T,
    pub exponent_ap_ris: T,
    pub exponent_ris_user: T,
}

impl<T: Real> Default for PathLossModel<T> {
    fn default() -> Self {
        Self {
            reference_gain: T::lit(1e-3),
            exponent_ap_user: T::lit(4.0),
            exponent_ap_ris: T::lit(2.5),
            exponent_ris_user: T::lit(2.0),
        }
    }
}

/// Large-scale gains of every link, indexed `[r][j]`, `[r][k]` and `[j][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LargeScale<T> {
    pub beta: Vec<Vec<T>>,
    pub alpha: Vec<Vec<T>>,
    pub gamma: Vec<Vec<T>>,
}

impl<T: Real> PathLossModel<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.reference_gain > T::zero()) {
            return invalid("reference gain must be positive");
        }
        Ok(())
    }

    pub fn large_scale(&self, topo: &SystemTopology<T>) -> Result<LargeScale<T>> {
        self.validate()?;
        let g = self.reference_gain;
        let link = |a: &Point3<T>, b: &Point3<T>, e: T| path_loss(distance(a, b), e, g);
        let beta = topo
            .ris_positions
            .iter()
            .map(|r| {
                topo.ap_positions
                    .iter()
                    .map(|a| link(r, a, self.exponent_ap_ris))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let alpha = topo
            .ris_positions
            .iter()
            .map(|r| {
                topo.user_positions
                    .iter()
                    .map(|u| link(r, u, self.exponent_ris_user))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let gamma = topo
            .ap_positions
            .iter()
            .map(|a| {
                topo.user_positions
                    .iter()
                    .map(|u| link(a, u, self.exponent_ap_user))
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(LargeScale { beta, alpha, gamma })
    }
}

/// Rician factors κ per (r, j) and ε per (r, k).
#[derive(Clone, Debug, PartialEq)]
pub struct RicianFactors<T> {
    pub kappa: Vec<Vec<T>>,
    pub epsilon: Vec<Vec<T>>,
}

impl<T: Real> RicianFactors<T> {
    pub fn uniform(kappa: T, epsilon: T, num_ris: usize, num_aps: usize, num_users: usize) -> Self {
        Self {
            kappa: vec![vec![kappa; num_aps]; num_ris],
            epsilon: vec![vec![epsilon; num_users]; num_ris],
        }
    }
}

/// Angles of the LoS components, indexed `[r][j]` or `[r][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleSet<T> {
    pub aoa_ap: Vec<Vec<T>>,
    pub aod_ris_azimuth: Vec<Vec<T>>,
    pub aod_ris_elevation: Vec<Vec<T>>,
    pub aoa_ris_azimuth: Vec<Vec<T>>,
    pub aoa_ris_elevation: Vec<Vec<T>>,
}

impl<T: Real> AngleSet<T> {
    /// Azimuths uniform on `[0, 2π)`, elevations uniform on `[0, π)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, num_ris: usize, num_aps: usize, num_users: usize) -> Self {
        let mut table = |cols: usize, span: f64| -> Vec<Vec<T>> {
            (0..num_ris)
                .map(|_| (0..cols).map(|_| T::lit(rng.random::<f64>() * span)).collect())
                .collect()
        };
        let tau = std::f64::consts::TAU;
        let pi = std::f64::consts::PI;
        let aoa_ap = table(num_aps, tau);
        let aod_ris_azimuth = table(num_aps, tau);
        let aod_ris_elevation = table(num_aps, pi);
        let aoa_ris_azimuth = table(num_users, tau);
        let aoa_ris_elevation = table(num_users, pi);
        Self {
            aoa_ap,
            aod_ris_azimuth,
            aod_ris_elevation,
            aoa_ris_azimuth,
            aoa_ris_elevation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: Cx<f64>, re: f64, im: f64) -> bool {
        (a - Cx::new(re, im)).norm() < 1e-12
    }

    #[test]
    fn single_element_is_one() {
        let v = array_response(1, (1, 1), 1.3, 0.4, 0.5, ArrayKind::Uspa).unwrap();
        assert!(close(v[0], 1.0, 0.0));
    }

    #[test]
    fn ula_broadside_is_flat() {
        let v = array_response(4, (1, 4), 0.0, 0.0, 0.5, ArrayKind::Ula).unwrap();
        assert!(v.iter().all(|z| close(*z, 1.0, 0.0)));
    }

    #[test]
    fn uspa_two_by_two_hand_values() {
        let v = array_response(4, (2, 2), FRAC_PI_2, FRAC_PI_2, 0.5, ArrayKind::Uspa).unwrap();
        let want = [1.0, 1.0, -1.0, -1.0];
        for (z, w) in v.iter().zip(want) {
            assert!(close(*z, w, 0.0), "{z} vs {w}");
        }
    }

    #[test]
    fn responses_are_unit_modulus() {
        let v = array_response(30, (5, 6), 2.1f64, 1.1, 0.5, ArrayKind::Uspa).unwrap();
        assert!(v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert!(close(v[0], 1.0, 0.0));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        assert!(array_response::<f64>(30, (5, 5), 0.0, 0.0, 0.5, ArrayKind::Uspa).is_err());
        assert!(array_response::<f64>(0, (0, 0), 0.0, 0.0, 0.5, ArrayKind::Ula).is_err());
        assert!(square_grid(30).is_err());
        assert_eq!(square_grid(36).unwrap(), (6, 6));
    }

    #[test]
    fn path_loss_values() {
        assert!((path_loss(1.0f64, 4.0, 1e-3).unwrap() - 1e-3).abs() < 1e-18);
        assert!((path_loss(10.0f64, 2.0, 1e-3).unwrap() - 1e-5).abs() < 1e-18);
        assert!((path_loss(10.0f64, 0.0, 1e-3).unwrap() - 1e-3).abs() < 1e-18);
        assert!(path_loss(0.0, 2.0, 1e-3).is_err());
    }

    #[test]
    fn f32_response_matches_f64() {
        let a = array_response(16, (4, 4), 0.7f32, 1.9, 0.5, ArrayKind::Uspa).unwrap();
        let b = array_response(16, (4, 4), 0.7f64, 1.9, 0.5, ArrayKind::Uspa).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.re as f64 - y.re).abs() < 1e-5 && (x.im as f64 - y.im).abs() < 1e-5);
        }
    }
}
