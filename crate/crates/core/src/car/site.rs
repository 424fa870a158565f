use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest lattice dimension supported by [`Site`].
pub const MAX_DIM: usize = 3;

/// A point of the integer lattice `Z^dim`, `1 <= dim <= MAX_DIM`.
///
/// Unused coordinates are kept at zero so the derived order is the
/// lexicographic order of the used coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    coords: [i32; MAX_DIM],
    dim: u8,
}

impl Site {
    pub fn new(coords: &[i32]) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&coords.len()),
            "site dimension must be between 1 and {MAX_DIM}"
        );
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site { coords: c, dim: coords.len() as u8 }
    }

    /// Site on the one-dimensional lattice.
    pub fn d1(x: i32) -> Self {
        Site::new(&[x])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim()]
    }

    /// Max-norm distance `max_i |x_i - y_i|`.
    pub fn distance(&self, other: &Site) -> u32 {
        debug_assert_eq!(self.dim, other.dim);
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| a.abs_diff(*b))
            .max()
            .unwrap_or(0)
    }

    pub fn translate(&self, shift: &[i32]) -> Site {
        let mut out = *self;
        for (c, s) in out.coords.iter_mut().zip(shift) {
            *c += s;
        }
        out
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords().iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Finite set of lattice sites with a fixed (lexicographic) iteration order.
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Region {
    sites: BTreeSet<Site>,
}

impl Region {
    pub fn empty() -> Self {
        Region::default()
    }

    /// One-dimensional interval `{lo, ..., hi}`.
    pub fn interval(lo: i32, hi: i32) -> Self {
        (lo..=hi).map(Site::d1).collect()
    }

    /// Box `[lo_1, hi_1] x ... x [lo_dim, hi_dim]`.
    pub fn boxed(bounds: &[(i32, i32)]) -> Self {
        let mut out = vec![Vec::new()];
        for &(lo, hi) in bounds {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<i32>| {
                    (lo..=hi).map(move |x| {
                        let mut p = prefix.clone();
                        p.push(x);
                        p
                    })
                })
                .collect();
        }
        out.iter().map(|c| Site::new(c)).collect()
    }

    /// Cube of side `l` centred at the origin in `dim` dimensions.
    pub fn cube(dim: usize, l: u32) -> Self {
        let lo = -((l as i32 - 1) / 2);
        let hi = lo + l as i32 - 1;
        Region::boxed(&vec![(lo, hi); dim])
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Site> + '_ {
        self.sites.iter()
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.sites.contains(s)
    }

    pub fn insert(&mut self, s: Site) {
        self.sites.insert(s);
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.sites.is_subset(&other.sites)
    }

    pub fn intersects(&self, other: &Region) -> bool {
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.iter().any(|s| large.contains(s))
    }

    pub fn union(&self, other: &Region) -> Region {
        self.sites.union(&other.sites).copied().collect()
    }

    pub fn dim(&self) -> Option<usize> {
        self.sites.iter().next().map(Site::dim)
    }

    /// `max |x - y|` over pairs; zero for regions with fewer than two sites.
    pub fn diameter(&self) -> u32 {
        let sites: Vec<&Site> = self.sites.iter().collect();
        let mut d = 0;
        for (i, a) in sites.iter().enumerate() {
            for b in &sites[i + 1..] {
                d = d.max(a.distance(b));
            }
        }
        d
    }

    /// All sites within max-distance `r` of the region; `enlarge(0)` is the region itself.
    pub fn enlarge(&self, r: u32) -> Region {
        if r == 0 {
            return self.clone();
        }
        let r = r as i32;
        let mut out = BTreeSet::new();
        for s in &self.sites {
            let bounds: Vec<(i32, i32)> = s.coords().iter().map(|c| (c - r, c + r)).collect();
            out.extend(Region::boxed(&bounds).sites);
        }
        Region { sites: out }
    }

    pub fn translate(&self, shift: &[i32]) -> Region {
        self.sites.iter().map(|s| s.translate(shift)).collect()
    }

    /// Component-wise coordinate bounds, if non-empty.
    pub fn bounds(&self) -> Option<Vec<(i32, i32)>> {
        let dim = self.dim()?;
        let mut b = vec![(i32::MAX, i32::MIN); dim];
        for s in &self.sites {
            for (k, c) in s.coords().iter().enumerate() {
                b[k].0 = b[k].0.min(*c);
                b[k].1 = b[k].1.max(*c);
            }
        }
        Some(b)
    }

    /// Position of a site in the region's iteration order.
    pub fn index_of(&self, s: &Site) -> Option<usize> {
        if !self.contains(s) {
            return None;
        }
        Some(self.sites.range(..s).count())
    }

    pub fn to_vec(&self) -> Vec<Site> {
        self.sites.iter().copied().collect()
    }
}

impl FromIterator<Site> for Region {
    fn from_iter<T: IntoIterator<Item = Site>>(iter: T) -> Self {
        Region { sites: iter.into_iter().collect() }
    }
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .sites
            .iter()
            .map(|s| if s.dim() == 1 { s.to_string() } else { format!("({s})") })
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enlargement_adds_sites_within_range() {
        let i = Region::interval(0, 1);
        assert_eq!(i.enlarge(0), i);
        assert_eq!(i.enlarge(2), Region::interval(-2, 3));
        let two = Region::boxed(&[(0, 0), (0, 0)]).enlarge(1);
        assert_eq!(two.len(), 9);
    }

    #[test]
    fn diameter_and_cube() {
        assert_eq!(Region::interval(-1, 1).diameter(), 2);
        assert_eq!(Region::empty().diameter(), 0);
        assert_eq!(Region::cube(1, 3), Region::interval(-1, 1));
        assert_eq!(Region::cube(2, 2).len(), 4);
    }

    #[test]
    fn index_follows_lexicographic_order() {
        let r = Region::interval(-3, 3);
        assert_eq!(r.index_of(&Site::d1(-3)), Some(0));
        assert_eq!(r.index_of(&Site::d1(3)), Some(6));
        assert_eq!(r.index_of(&Site::d1(4)), None);
    }
}
