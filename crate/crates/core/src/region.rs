//! Analysis regions and reproducible quasi-random sampling over them.
//!
//! Points come from a Halton sequence over the `n + 1` dimensional box
//! (states plus time), shifted by a seeded random offset (Cranley-Patterson
//! rotation). The same `(region, count, seed)` always yields the same points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x: Vec<(f64, f64)>,
    pub t: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegionError {
    #[error("interval for {name} is invalid: [{lo}, {hi}]")]
    BadInterval { name: String, lo: f64, hi: f64 },
    #[error("region has {got} state intervals but the system has {expected} states")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample count must be at least {min}, got {got}")]
    TooFewSamples { min: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl Region {
    pub fn new(x: Vec<(f64, f64)>, t: (f64, f64)) -> Result<Self, RegionError> {
        let check = |name: String, (lo, hi): (f64, f64)| {
            if lo.is_finite() && hi.is_finite() && lo <= hi {
                Ok(())
            } else {
                Err(RegionError::BadInterval { name, lo, hi })
            }
        };
        for (k, iv) in x.iter().enumerate() {
            check(format!("x{}", k + 1), *iv)?;
        }
        check("t".into(), t)?;
        Ok(Self { x, t })
    }

    /// The same interval for every state.
    pub fn cube(n: usize, lo: f64, hi: f64, t: (f64, f64)) -> Result<Self, RegionError> {
        Self::new(vec![(lo, hi); n], t)
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn check_dim(&self, n: usize) -> Result<(), RegionError> {
        if self.x.len() == n {
            Ok(())
        } else {
            Err(RegionError::DimensionMismatch { expected: n, got: self.x.len() })
        }
    }

    pub fn contains(&self, p: &SamplePoint) -> bool {
        p.x.len() == self.x.len()
            && p.x.iter().zip(&self.x).all(|(v, (lo, hi))| lo <= v && v <= hi)
            && self.t.0 <= p.t
            && p.t <= self.t.1
    }

    /// True when `self` lies inside `other`.
    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.x.len() == other.x.len()
            && self.x.iter().zip(&other.x).all(|(a, b)| b.0 <= a.0 && a.1 <= b.1)
            && other.t.0 <= self.t.0
            && self.t.1 <= other.t.1
    }

    /// `count` low-discrepancy points, reproducible for a given `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<SamplePoint> {
        let dims = self.x.len() + 1;
        let bases = first_primes(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
        let lerp = |(lo, hi): (f64, f64), u: f64| lo + (hi - lo) * u;

        (1..=count as u64)
            .map(|i| {
                let mut u = bases.iter().zip(&shift).map(|(&b, s)| (radical_inverse(i, b) + s).fract());
                let x = self.x.iter().map(|iv| lerp(*iv, u.next().unwrap())).collect();
                let t = lerp(self.t, u.next().unwrap());
                SamplePoint { x, t }
            })
            .collect()
    }

    /// All corners of the box (states and time), or `None` beyond
    /// `max_dims` dimensions.
    pub fn vertices(&self, max_dims: usize) -> Option<Vec<SamplePoint>> {
        let dims = self.x.len() + 1;
        if dims > max_dims {
            return None;
        }
        let corner = |mask: u64, k: usize, (lo, hi): (f64, f64)| if mask >> k & 1 == 1 { hi } else { lo };
        Some(
            (0..1u64 << dims)
                .map(|mask| SamplePoint {
                    x: self.x.iter().enumerate().map(|(k, iv)| corner(mask, k, *iv)).collect(),
                    t: corner(mask, self.x.len(), self.t),
                })
                .collect(),
        )
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut c = 2u64;
    while primes.len() < count {
        if primes.iter().take_while(|&&p| p * p <= c).all(|&p| !c.is_multiple_of(p)) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_intervals() {
        assert!(Region::new(vec![(1.0, 0.0)], (0.0, 1.0)).is_err());
        assert!(Region::new(vec![(0.0, 1.0)], (2.0, 1.0)).is_err());
        assert!(Region::new(vec![(0.0, f64::NAN)], (0.0, 1.0)).is_err());
        assert!(Region::new(vec![(0.5, 0.5)], (0.0, 0.0)).is_ok());
    }

    #[test]
    fn samples_are_reproducible_and_inside() {
        let r = Region::cube(3, -0.9, 3.0, (0.0, 10.0)).unwrap();
        let a = r.sample(256, 42);
        let b = r.sample(256, 42);
        assert_eq!(a, b);
        assert_ne!(a, r.sample(256, 43));
        assert!(a.iter().all(|p| r.contains(p)));
    }

    #[test]
    fn samples_fill_the_box() {
        let r = Region::cube(2, 0.0, 1.0, (0.0, 1.0)).unwrap();
        let pts = r.sample(512, 7);
        // every octant of the unit cube receives points
        let mut hits = [0usize; 8];
        for p in &pts {
            let k = (p.x[0] > 0.5) as usize | ((p.x[1] > 0.5) as usize) << 1 | ((p.t > 0.5) as usize) << 2;
            hits[k] += 1;
        }
        assert!(hits.iter().all(|&h| h > 40), "{hits:?}");
    }

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_eq!(first_primes(5), vec![2, 3, 5, 7, 11]);
    }

    #[test]
    fn vertices_of_a_box() {
        let r = Region::new(vec![(-1.0, 2.0)], (0.0, 5.0)).unwrap();
        let v = r.vertices(10).unwrap();
        assert_eq!(v.len(), 4);
        assert!(v.contains(&SamplePoint { x: vec![2.0], t: 5.0 }));
        assert!(r.vertices(1).is_none());
    }
}
