use std::fmt;

use super::{level_radius, Level, NetHierarchy};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::stats::{packing_bound, set_stats};

/// Centers sampled per level for the ball-packing check.
const PACKING_CENTERS: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetCheck {
    pub name: &'static str,
    pub passed: bool,
    /// First counterexample on failure, a short summary otherwise.
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NetReport {
    pub checks: Vec<NetCheck>,
}

impl NetReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &'static str, failure: Option<String>, summary: String) {
        let passed = failure.is_none();
        self.checks.push(NetCheck { name, passed, detail: failure.unwrap_or(summary) });
    }
}

impl fmt::Display for NetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Quadratic audit of a hierarchy: separation and covering per level, a
/// unique root, parent links, the `2·2^j` ancestor bound (walking raw parent
/// links) and the packing inequality with `⌈ddim_est⌉` of the stored points.
pub fn verify_nets<T: Scalar>(h: &NetHierarchy<T>) -> Result<NetReport> {
    let ddim = if h.len() >= 2 { set_stats(h.points())?.ddim_ceil() } else { 1 };
    Ok(verify_nets_with(h, ddim))
}

/// [`verify_nets`] with an explicit doubling-dimension exponent.
pub fn verify_nets_with<T: Scalar>(h: &NetHierarchy<T>, ddim_ceil: u32) -> NetReport {
    let mut report = NetReport::default();
    let levels: Vec<Vec<usize>> = (0..=h.top_level()).map(|i| h.level_members(i)).collect();

    let mut failure = None;
    'sep: for (i, members) in levels.iter().enumerate() {
        let r = level_radius::<T>(i as Level);
        for (a, &x) in members.iter().enumerate() {
            for &y in &members[a + 1..] {
                if h.dist(x, y) < r {
                    failure = Some(format!("level {i}: points {x} and {y} at {} < {r}", h.dist(x, y)));
                    break 'sep;
                }
            }
        }
    }
    report.push("separation", failure, format!("{} levels", levels.len()));

    let mut failure = None;
    'cov: for i in 1..levels.len() {
        let r = level_radius::<T>(i as Level);
        for &v in &levels[i - 1] {
            if !levels[i].iter().any(|&u| h.dist(u, v) < r) {
                failure = Some(format!("level {i}: point {v} not covered within {r}"));
                break 'cov;
            }
        }
    }
    report.push("covering", failure, "every level covers the one below".into());

    let roots: Vec<usize> = (0..h.len()).filter(|&x| h.parent_of(x).is_none()).collect();
    let top = levels.last().cloned().unwrap_or_default();
    let failure = if roots.len() != 1 || top != roots {
        Some(format!("top level {:?}, parentless points {:?}", top, roots))
    } else {
        None
    };
    report.push("root", failure, format!("root {}", h.root()));

    let mut failure = None;
    for x in 0..h.len() {
        if let Some(p) = h.parent_of(x) {
            let above = h.top_of(x) + 1;
            if !h.contains(p, above) || h.dist(x, p) >= level_radius(above) {
                failure = Some(format!("point {x}: parent {p} does not cover it at level {above}"));
                break;
            }
        }
    }
    report.push("parent links", failure, "every parent covers its child".into());

    let mut failure = None;
    'anc: for x in 0..h.len() {
        let mut cur = x;
        for j in 0..=h.top_level() {
            while h.top_of(cur) < j {
                match h.parent_of(cur) {
                    Some(p) => cur = p,
                    None => {
                        failure = Some(format!("point {x}: parent chain ends below level {j}"));
                        break 'anc;
                    }
                }
            }
            let bound = T::lit(2.0) * level_radius(j);
            if h.dist(x, cur) >= bound {
                failure =
                    Some(format!("point {x}: ancestor {cur} at level {j} is {} away, bound {bound}", h.dist(x, cur)));
                break 'anc;
            }
        }
    }
    report.push("ancestor bound", failure, "all ancestors within 2·2^j".into());

    let mut failure = None;
    'pack: for (i, members) in levels.iter().enumerate() {
        if members.len() < 2 {
            continue;
        }
        let (mut alpha, mut diam) = (f64::INFINITY, 0.0f64);
        for (a, &x) in members.iter().enumerate() {
            for &y in &members[a + 1..] {
                let d = h.dist(x, y).as_f64();
                alpha = alpha.min(d);
                diam = diam.max(d);
            }
        }
        let bound = packing_bound(diam, alpha, ddim_ceil);
        if members.len() as f64 > bound {
            failure = Some(format!("level {i}: {} points exceed packing bound {bound:.3}", members.len()));
            break 'pack;
        }
        let unit = 2f64.powi(i as i32);
        let stride = (members.len() / PACKING_CENTERS).max(1);
        for &x in members.iter().step_by(stride).take(PACKING_CENTERS) {
            for r in [2.0 * unit, 4.0 * unit, 8.0 * unit] {
                let count = members.iter().filter(|&&y| h.dist(x, y).as_f64() <= r).count();
                let bound = (2.0 * 2.0 * r / unit).powi(ddim_ceil as i32);
                if count as f64 > bound {
                    failure = Some(format!("level {i}: ball({x}, {r}) holds {count} > {bound}"));
                    break 'pack;
                }
            }
        }
    }
    report.push("packing", failure, format!("exponent {ddim_ceil}"));
    report
}

#[cfg(test)]
mod tests {
    use super::super::tests::line;
    use super::*;

    #[test]
    fn valid_hierarchy_passes() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 13) % 51) as f64 * 0.75 + (i as f64).sqrt()).collect();
        let h = NetHierarchy::build(&line(&xs));
        let report = verify_nets(&h).unwrap();
        assert!(report.passed(), "{report}");
        assert_eq!(report.checks.len(), 6);
    }

    #[test]
    fn redirected_parent_breaks_ancestor_bound() {
        let xs: Vec<f64> = (0..32).map(|i| i as f64).chain([1000.0]).collect();
        let mut h = NetHierarchy::build(&line(&xs));
        let far = 32;
        let x = (0..32).find(|&x| h.top_of(x) == 0).unwrap();
        h.corrupt_parent(x, far);
        let report = verify_nets(&h).unwrap();
        assert!(!report.passed());
        let anc = report.checks.iter().find(|c| c.name == "ancestor bound").unwrap();
        assert!(!anc.passed);
        assert!(anc.detail.contains(&format!("point {x}")), "{}", anc.detail);
    }

    #[test]
    fn tiny_exponent_fails_packing() {
        let xs: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let h = NetHierarchy::build(&line(&xs));
        assert!(verify_nets_with(&h, 1).passed());
        // Fake a larger bottom level than any 0-dimensional bound allows.
        let report = verify_nets_with(&h, 0);
        assert!(!report.checks.iter().find(|c| c.name == "packing").unwrap().passed);
    }
}
