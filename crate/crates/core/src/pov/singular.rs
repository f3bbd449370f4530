//! Exact restricted laws for the deterministic north-east environment.
//!
//! Each site carries a fair arrow, right or up, and the walk follows it.
//! Seen from `X_n`, the environment restricted to the half-space
//! `𝔖_{−k} = {y : y·(1,1) ≥ −k}` is a finite mixture: the arrows fixed by
//! the walk inside the half-space, and fair coins everywhere else. The
//! mixtures for `ℙ_n` and `ℙ_k` are enumerated and compared exactly.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Site;

/// Largest number of walk outcomes enumerated.
pub const ENUMERATION_CAP: u128 = 1 << 20;

/// Arrow `true` points right, `false` points up.
type Key = Vec<(Site, bool)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularReport {
    pub n: usize,
    pub k: usize,
    pub components_n: usize,
    pub components_k: usize,
    /// Total variation between `ℙ_n|𝔖_{−k}` and `ℙ_k|𝔖_{−k}`.
    pub tv: f64,
    pub tv_exact: String,
    /// Total variation between `ℙ_n|𝔖_{−k}` and the product law `ℙ|𝔖_{−k}`.
    pub tv_vs_product: f64,
}

fn arrow(right: bool) -> Site {
    if right {
        Site::d2(1, 0)
    } else {
        Site::d2(0, 1)
    }
}

fn dfs(
    x: Site,
    steps_left: usize,
    depth: u32,
    assigned: &mut BTreeMap<Site, bool>,
    k: i64,
    out: &mut BTreeMap<Key, BigRational>,
) {
    if steps_left == 0 {
        let key: Key = assigned
            .iter()
            .map(|(s, a)| (*s - x, *a))
            .filter(|(y, _)| (y.coord(0) + y.coord(1)) as i64 >= -k)
            .collect();
        let w = BigRational::new(BigInt::one(), BigInt::one() << depth);
        *out.entry(key).or_insert_with(BigRational::zero) += w;
        return;
    }
    if let Some(a) = assigned.get(&x).copied() {
        dfs(x + arrow(a), steps_left - 1, depth, assigned, k, out);
        return;
    }
    for a in [true, false] {
        assigned.insert(x, a);
        dfs(x + arrow(a), steps_left - 1, depth + 1, assigned, k, out);
        assigned.remove(&x);
    }
}

/// Mixture components of `ℙ_n|𝔖_{−k}`, keyed by the fixed arrows.
pub fn restricted_components(n: usize, k: usize) -> Result<Mixture> {
    let outcomes = 1u128.checked_shl(n as u32).unwrap_or(u128::MAX);
    if outcomes > ENUMERATION_CAP {
        return Err(Error::EnumerationCap { what: "walk outcomes", size: outcomes, cap: ENUMERATION_CAP });
    }
    let mut out = BTreeMap::new();
    dfs(Site::d2(0, 0), n, 0, &mut BTreeMap::new(), k as i64, &mut out);
    Ok(out)
}

type Mixture = BTreeMap<Key, BigRational>;

/// Split a mixture on the arrow at `site`. Components that leave it free
/// go to both halves at half weight.
fn split(m: &Mixture, site: Site) -> [Mixture; 2] {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut out = [Mixture::new(), Mixture::new()];
    for (key, w) in m {
        match key.iter().position(|(s, _)| *s == site) {
            Some(i) => {
                let mut rest = key.clone();
                let (_, a) = rest.remove(i);
                *out[a as usize].entry(rest).or_insert_with(BigRational::zero) += w;
            }
            None => {
                for branch in out.iter_mut() {
                    *branch.entry(key.clone()).or_insert_with(BigRational::zero) += w * &half;
                }
            }
        }
    }
    out
}

/// Exact total variation between two mixtures of "fixed arrows on a finite
/// set, fair coins elsewhere", by splitting on one constrained arrow at a
/// time until the two sides agree.
fn mixture_tv(p: &Mixture, q: &Mixture) -> Result<BigRational> {
    let mut nodes = 0u128;
    let twice = tv_rec(p, q, &mut nodes)?;
    Ok(twice / BigRational::from_integer(BigInt::from(2)))
}

fn tv_rec(p: &Mixture, q: &Mixture, nodes: &mut u128) -> Result<BigRational> {
    *nodes += 1;
    if *nodes > ENUMERATION_CAP {
        return Err(Error::EnumerationCap { what: "mixture splits", size: *nodes, cap: ENUMERATION_CAP });
    }
    if p == q {
        return Ok(BigRational::zero());
    }
    let site = p.keys().chain(q.keys()).flat_map(|k| k.first()).map(|(s, _)| *s).next();
    match site {
        // both sides are pure fair coins
        None => {
            let mass = |m: &Mixture| m.values().fold(BigRational::zero(), |a, w| a + w);
            Ok((mass(p) - mass(q)).abs())
        }
        Some(site) => {
            let [p0, p1] = split(p, site);
            let [q0, q1] = split(q, site);
            Ok(tv_rec(&p0, &q0, nodes)? + tv_rec(&p1, &q1, nodes)?)
        }
    }
}

/// Exact total variation between `ℙ_n|𝔖_{−k}` and the product law.
///
/// On the back-diagonal `{y·(1,1) = −j}` the sites whose arrows lead to the
/// particle form an interval. Its length moves by `+1` and `−1` with
/// probability `1/4` each, starting from 1, and the restricted law's density
/// against the product law is that length at `j = k`. The distance is the
/// probability that the interval has died out by then.
fn product_tv(k: usize) -> BigRational {
    let quarter = BigRational::new(BigInt::one(), BigInt::from(4));
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut law = vec![BigRational::zero(), BigRational::one()];
    for _ in 0..k {
        let mut next = vec![BigRational::zero(); law.len() + 1];
        next[0] += &law[0];
        for (len, p) in law.iter().enumerate().skip(1) {
            next[len - 1] += p * &quarter;
            next[len] += p * &half;
            next[len + 1] += p * &quarter;
        }
        law = next;
    }
    law.swap_remove(0)
}

/// Compare `ℙ_n|𝔖_{−k}` with `ℙ_k|𝔖_{−k}` by exact enumeration.
pub fn singular_restriction_check(n: usize, k: usize) -> Result<SingularReport> {
    if k > n {
        return Err(Error::InvalidParams(format!("need k ≤ n, got k = {k}, n = {n}")));
    }
    let pn = restricted_components(n, k)?;
    let pk = restricted_components(k, k)?;
    let tv = mixture_tv(&pn, &pk)?;
    let tv_prod = product_tv(k);
    Ok(SingularReport {
        n,
        k,
        components_n: pn.len(),
        components_k: pk.len(),
        tv: tv.to_f64().unwrap_or(f64::NAN),
        tv_exact: tv.to_string(),
        tv_vs_product: tv_prod.to_f64().unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_zero_is_product() {
        for n in 0..6 {
            let r = singular_restriction_check(n, 0).unwrap();
            assert_eq!(r.tv_exact, "0");
            assert_eq!(r.tv_vs_product, 0.0);
        }
    }

    #[test]
    fn one_step_back_differs_from_product() {
        // the predecessor site points at the particle: P(both neighbours fixed
        // toward the origin) = 1/2 instead of 1/4
        let r = singular_restriction_check(3, 1).unwrap();
        assert_eq!(r.tv, 0.0);
        assert!((r.tv_vs_product - 0.25).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_one() {
        let c = restricted_components(5, 2).unwrap();
        let total: BigRational = c.values().cloned().sum();
        assert!(total.is_one());
    }

    #[test]
    fn product_distance_matches_mixture_splitting() {
        let product: Mixture = [(Vec::new(), BigRational::one())].into_iter().collect();
        for k in 0..=4 {
            let pk = restricted_components(k, k).unwrap();
            assert_eq!(mixture_tv(&pk, &product).unwrap(), product_tv(k), "k = {k}");
        }
        assert_eq!(product_tv(2), BigRational::new(BigInt::from(3), BigInt::from(8)));
    }

    #[test]
    fn cap_enforced() {
        assert!(matches!(restricted_components(21, 0), Err(Error::EnumerationCap { .. })));
    }
}
