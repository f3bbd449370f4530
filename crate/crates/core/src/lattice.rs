//! Lattice points, displacements and directions in `Z^d`, `d <= MAX_DIM`.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 4;

/// A point (or displacement) of `Z^d`. Unused trailing coordinates stay zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    dim: u8,
    coords: [i32; MAX_DIM],
}

impl Site {
    pub fn new(coords: &[i32]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::InvalidParams(format!(
                "site dimension {} outside 1..={MAX_DIM}",
                coords.len()
            )));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Site { dim: coords.len() as u8, coords: c })
    }

    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        Site { dim: dim as u8, coords: [0; MAX_DIM] }
    }

    pub fn d1(x: i32) -> Self {
        Site { dim: 1, coords: [x, 0, 0, 0] }
    }

    pub fn d2(x: i32, y: i32) -> Self {
        Site { dim: 2, coords: [x, y, 0, 0] }
    }

    /// Unit vector along `axis` with the given sign.
    pub fn unit(dim: usize, axis: usize, sign: i32) -> Self {
        let mut s = Site::origin(dim);
        s.coords[axis] = sign;
        s
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> i32 {
        self.coords[axis]
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    /// Sup-norm, the norm used for the range `M`.
    #[inline]
    pub fn sup_norm(&self) -> i64 {
        self.coords.iter().map(|c| (*c as i64).abs()).max().unwrap_or(0)
    }

    pub fn l1_norm(&self) -> i64 {
        self.coords.iter().map(|c| (*c as i64).abs()).sum()
    }

    pub fn sup_dist(&self, other: &Site) -> i64 {
        (*self - *other).sup_norm()
    }

    #[inline]
    pub fn dot(&self, ell: &Direction) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim as usize {
            acc += self.coords[i] as f64 * ell.comps[i];
        }
        acc
    }

    /// Stable 64-bit key used by the site hash.
    #[inline]
    pub(crate) fn key_words(&self) -> [u64; MAX_DIM] {
        let mut out = [0u64; MAX_DIM];
        for (o, c) in out.iter_mut().zip(self.coords.iter()) {
            *o = *c as i64 as u64;
        }
        out
    }

    /// All points of the sup-norm ball of radius `radius` around the origin.
    pub fn ball(dim: usize, radius: i32) -> Vec<Site> {
        let mut out = Vec::new();
        let mut cur = vec![-radius; dim];
        loop {
            out.push(Site::new(&cur).expect("dimension checked by caller"));
            let mut axis = 0;
            loop {
                if axis == dim {
                    return out;
                }
                cur[axis] += 1;
                if cur[axis] <= radius {
                    break;
                }
                cur[axis] = -radius;
                axis += 1;
            }
        }
    }
}

impl Add for Site {
    type Output = Site;

    #[inline]
    fn add(self, rhs: Site) -> Site {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut c = self.coords;
        for (a, b) in c.iter_mut().zip(rhs.coords.iter()) {
            *a += *b;
        }
        Site { dim: self.dim, coords: c }
    }
}

impl Sub for Site {
    type Output = Site;

    #[inline]
    fn sub(self, rhs: Site) -> Site {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut c = self.coords;
        for (a, b) in c.iter_mut().zip(rhs.coords.iter()) {
            *a -= *b;
        }
        Site { dim: self.dim, coords: c }
    }
}

impl Neg for Site {
    type Output = Site;

    fn neg(self) -> Site {
        let mut c = self.coords;
        for a in c.iter_mut() {
            *a = -*a;
        }
        Site { dim: self.dim, coords: c }
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Site {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i32>::deserialize(d)?;
        Site::new(&v).map_err(serde::de::Error::custom)
    }
}

/// A transience direction `ℓ ∈ R^d \ {0}`.
#[derive(Clone, Copy, PartialEq)]
pub struct Direction {
    dim: u8,
    comps: [f64; MAX_DIM],
}

impl Direction {
    pub fn new(comps: &[f64]) -> Result<Self> {
        if comps.is_empty() || comps.len() > MAX_DIM {
            return Err(Error::InvalidParams(format!(
                "direction dimension {} outside 1..={MAX_DIM}",
                comps.len()
            )));
        }
        if comps.iter().all(|c| *c == 0.0) || comps.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams("direction must be finite and nonzero".into()));
        }
        let mut c = [0.0; MAX_DIM];
        c[..comps.len()].copy_from_slice(comps);
        Ok(Direction { dim: comps.len() as u8, comps: c })
    }

    /// The first coordinate axis.
    pub fn axis(dim: usize) -> Self {
        let mut c = [0.0; MAX_DIM];
        c[0] = 1.0;
        Direction { dim: dim as u8, comps: c }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn comps(&self) -> &[f64] {
        &self.comps[..self.dim as usize]
    }

    pub fn norm(&self) -> f64 {
        self.comps().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Self {
        self.scaled(1.0 / self.norm())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut c = self.comps;
        for x in c.iter_mut() {
            *x *= factor;
        }
        Direction { dim: self.dim, comps: c }
    }

    pub fn dot_vec(&self, v: &[f64]) -> f64 {
        self.comps().iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

impl fmt::Debug for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ℓ{:?}", self.comps())
    }
}

impl Serialize for Direction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.comps().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Direction::new(&v).map_err(serde::de::Error::custom)
    }
}

/// Axis-aligned box `lo ..= hi` with row-major indexing (axis 0 fastest).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    pub lo: Site,
    pub hi: Site,
}

impl LatticeBox {
    pub fn new(lo: Site, hi: Site) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::InvalidParams("box corners differ in dimension".into()));
        }
        if lo.coords().iter().zip(hi.coords()).any(|(a, b)| a > b) {
            return Err(Error::InvalidParams(format!("empty box {lo}..={hi}")));
        }
        Ok(LatticeBox { lo, hi })
    }

    /// Centred cube of half-width `r`.
    pub fn cube(dim: usize, r: i32) -> Self {
        let lo = Site::new(&vec![-r; dim]).expect("valid dimension");
        let hi = Site::new(&vec![r; dim]).expect("valid dimension");
        LatticeBox { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn side(&self, axis: usize) -> usize {
        (self.hi.coord(axis) - self.lo.coord(axis) + 1) as usize
    }

    pub fn len(&self) -> usize {
        (0..self.dim()).map(|a| self.side(a)).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, s: &Site) -> bool {
        (0..self.dim()).all(|a| (self.lo.coord(a)..=self.hi.coord(a)).contains(&s.coord(a)))
    }

    #[inline]
    pub fn index(&self, s: &Site) -> Option<usize> {
        let mut idx = 0usize;
        let mut stride = 1usize;
        for a in 0..self.dim() {
            let c = s.coord(a);
            if c < self.lo.coord(a) || c > self.hi.coord(a) {
                return None;
            }
            idx += (c - self.lo.coord(a)) as usize * stride;
            stride *= self.side(a);
        }
        Some(idx)
    }

    pub fn site(&self, mut idx: usize) -> Site {
        let mut c = [0i32; MAX_DIM];
        for (a, slot) in c.iter_mut().enumerate().take(self.dim()) {
            let side = self.side(a);
            *slot = self.lo.coord(a) + (idx % side) as i32;
            idx /= side;
        }
        Site::new(&c[..self.dim()]).expect("box dimension is valid")
    }

    pub fn sites(&self) -> Vec<Site> {
        (0..self.len()).map(|i| self.site(i)).collect()
    }
}

/// Half-space level of a point: `floor(x·ℓ)` with a small guard against
/// rounding in directions like `(1,1)/√2`.
#[inline]
pub fn level_floor(x_dot_ell: f64) -> i64 {
    (x_dot_ell + 1e-9).floor() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_norms() {
        let a = Site::d2(3, -1);
        let b = Site::d2(1, 2);
        assert_eq!(a + b, Site::d2(4, 1));
        assert_eq!(a - b, Site::d2(2, -3));
        assert_eq!((a - b).sup_norm(), 3);
        assert_eq!((a - b).l1_norm(), 5);
        assert_eq!(-a, Site::d2(-3, 1));
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(Site::ball(1, 1).len(), 3);
        assert_eq!(Site::ball(2, 1).len(), 9);
        assert_eq!(Site::ball(2, 2).len(), 25);
    }

    #[test]
    fn serde_round_trip() {
        let s = Site::d2(-4, 7);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, "[-4,7]");
        assert_eq!(serde_json::from_str::<Site>(&text).unwrap(), s);
        assert!(serde_json::from_str::<Direction>("[0,0]").is_err());
    }

    #[test]
    fn box_indexing_round_trips() {
        let b = LatticeBox::new(Site::d2(-1, 2), Site::d2(2, 4)).unwrap();
        assert_eq!(b.len(), 12);
        for (i, s) in b.sites().iter().enumerate() {
            assert_eq!(b.index(s), Some(i));
        }
        assert_eq!(b.index(&Site::d2(3, 2)), None);
    }

    #[test]
    fn projection() {
        let ell = Direction::new(&[1.0, 1.0]).unwrap().normalized();
        let x = Site::d2(1, 0);
        assert!((x.dot(&ell) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(level_floor(Site::d2(2, 1).dot(&Direction::new(&[1.0, 1.0]).unwrap())), 3);
    }
}
