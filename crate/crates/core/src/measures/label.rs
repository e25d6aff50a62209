use std::fmt;

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Ulam-Harris-Neveu label: a finite word over the positive integers.
/// The empty word is the root.
///
/// The derived order is lexicographic with a proper prefix sorting before its
/// extensions, so a parent sorts immediately before its children.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Label(SmallVec<[u32; 6]>);

impl Label {
    pub fn root() -> Self {
        Label(SmallVec::new())
    }

    pub fn from_path(path: &[u32]) -> Result<Self> {
        if path.contains(&0) {
            return Err(Error::Configuration("label components must be positive".into()));
        }
        Ok(Label(SmallVec::from_slice(path)))
    }

    pub fn path(&self) -> &[u32] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// `k i` for a positive integer `i`.
    pub fn child(&self, i: u32) -> Self {
        debug_assert!(i > 0);
        let mut v = self.0.clone();
        v.push(i);
        Label(v)
    }

    pub fn concat(&self, other: &Label) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Label(v)
    }

    pub fn parent(&self) -> Option<Label> {
        if self.0.is_empty() {
            None
        } else {
            Some(Label(SmallVec::from_slice(&self.0[..self.0.len() - 1])))
        }
    }

    /// Strict prefix order `self ≺ other`.
    pub fn precedes(&self, other: &Label) -> bool {
        self.0.len() < other.0.len() && other.0.starts_with(&self.0)
    }

    pub fn comparable(&self, other: &Label) -> bool {
        self == other || self.precedes(other) || other.precedes(self)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("root");
        }
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Label({self})")
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "root" || s.is_empty() {
            return Ok(Label::root());
        }
        let path = s
            .split('.')
            .map(|c| {
                c.parse::<u32>()
                    .map_err(|_| Error::Configuration(format!("bad label component {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Label::from_path(&path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_order_is_strict() {
        let root = Label::root();
        let a = root.child(1);
        let ab = a.child(2);
        assert!(root.precedes(&a));
        assert!(a.precedes(&ab));
        assert!(root.precedes(&ab));
        assert!(!a.precedes(&a));
        assert!(!ab.precedes(&a));
        assert!(!a.precedes(&root.child(2)));
    }

    #[test]
    fn lexicographic_order_places_children_after_parent() {
        let a = Label::from_path(&[1]).unwrap();
        let a3 = a.child(3);
        let b = Label::from_path(&[2]).unwrap();
        assert!(a < a3 && a3 < b);
    }

    #[test]
    fn display_round_trip() {
        for l in [Label::root(), Label::from_path(&[3, 1, 2]).unwrap()] {
            let s = l.to_string();
            assert_eq!(s.parse::<Label>().unwrap(), l);
        }
        assert!("1.0".parse::<Label>().is_err());
    }

    #[test]
    fn concat_and_parent() {
        let a = Label::from_path(&[1, 2]).unwrap();
        let b = Label::from_path(&[3]).unwrap();
        let ab = a.concat(&b);
        assert_eq!(ab.path(), &[1, 2, 3]);
        assert_eq!(ab.parent(), Some(a));
        assert_eq!(Label::root().parent(), None);
    }
}
