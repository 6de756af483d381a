//! Group models, canonical normal forms and the word metric.
//!
//! Every element is handled through a [`NormalForm`]: the canonical geodesic
//! word of the element over the group's symmetric alphabet. Normal forms are
//! plain byte strings of letter indices, so they hash and compare cheaply and
//! serve as the key type for every kernel in the crate.

mod automaton;
mod dehn;
mod geometry;

pub use automaton::{
    AutomatonEdge, BuildParams, ConstructionMethod, GeodesicAutomaton, RadiusCheck,
    ValidationReport,
};
pub use dehn::DehnValidation;
pub use geometry::{
    estimate_delta, extension_constant, four_point_delta, gromov_product, FourPointReport,
};
pub(crate) use geometry::random_element;

use std::fmt;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Index of a letter in a group's alphabet.
pub type Letter = u8;

/// Default cap on the number of elements held by a sphere enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 20_000_000;

/// User-facing description of a group model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupSpec {
    /// Free group on `rank` generators `a, b, c, ...`; inverses are upper case.
    Free { rank: usize },
    /// Free product of cyclic groups of the given orders (each ≥ 2).
    FreeProduct { orders: Vec<u32> },
    /// The lattice Z^dim with its standard generators.
    Lattice { dim: usize },
    /// A one-letter-per-generator presentation whose relators satisfy a
    /// small-cancellation piece bound, solved with Dehn's algorithm.
    DehnPresentation {
        generators: Vec<String>,
        relators: Vec<String>,
    },
}

impl GroupSpec {
    pub fn free(rank: usize) -> Self {
        GroupSpec::Free { rank }
    }

    pub fn free_product(orders: &[u32]) -> Self {
        GroupSpec::FreeProduct {
            orders: orders.to_vec(),
        }
    }

    pub fn lattice(dim: usize) -> Self {
        GroupSpec::Lattice { dim }
    }

    /// Closed orientable surface group of the given genus with the standard
    /// presentation `[a1,b1]...[ag,bg] = 1`.
    pub fn surface(genus: usize) -> Self {
        let names: Vec<char> = "abcdfghijklmnopqrstuvwxyz".chars().collect();
        let gens: Vec<String> = names[..2 * genus].iter().map(|c| c.to_string()).collect();
        let mut rel = String::new();
        for g in 0..genus {
            let a = names[2 * g];
            let b = names[2 * g + 1];
            rel.push(a);
            rel.push(b);
            rel.push(a.to_ascii_uppercase());
            rel.push(b.to_ascii_uppercase());
        }
        GroupSpec::DehnPresentation {
            generators: gens,
            relators: vec![rel],
        }
    }
}

/// Symmetric generating alphabet with the formal inversion involution.
#[derive(Clone, Debug)]
pub struct Alphabet {
    names: Vec<String>,
    inverse: Vec<Letter>,
}

impl Alphabet {
    fn new(names: Vec<String>, inverse: Vec<Letter>) -> Self {
        debug_assert!(inverse
            .iter()
            .enumerate()
            .all(|(i, &j)| inverse[j as usize] as usize == i));
        Alphabet { names, inverse }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, l: Letter) -> &str {
        &self.names[l as usize]
    }

    pub fn inverse(&self, l: Letter) -> Letter {
        self.inverse[l as usize]
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> + '_ {
        (0..self.names.len()).map(|l| l as Letter)
    }

    pub fn lookup(&self, name: &str) -> Option<Letter> {
        self.names.iter().position(|n| n == name).map(|i| i as Letter)
    }
}

/// Canonical geodesic word representing a group element.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NormalForm {
    tag: u32,
    letters: SmallVec<[Letter; 16]>,
}

impl NormalForm {
    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    /// Word length of the normal form.
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Fingerprint of the group the element belongs to.
    pub fn group_tag(&self) -> u32 {
        self.tag
    }

    /// Raw byte encoding used by the on-disk distribution cache.
    pub fn as_bytes(&self) -> &[u8] {
        &self.letters
    }
}

impl fmt::Debug for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NormalForm{:?}", self.letters.as_slice())
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Free,
    FreeProduct(FreeProductData),
    Lattice { dim: usize },
    Dehn(dehn::DehnData),
}

#[derive(Clone, Debug)]
struct FreeProductData {
    orders: Vec<u32>,
    /// First letter (the positive generator) of each factor.
    factor_letter: Vec<Letter>,
    letter_factor: Vec<usize>,
    letter_delta: Vec<i64>,
}

/// A group model with a solved word problem.
#[derive(Clone, Debug)]
pub struct Group {
    spec: GroupSpec,
    alphabet: Alphabet,
    kind: Kind,
    tag: u32,
    hash: String,
    enumeration_cap: usize,
}

fn lower_upper(i: usize) -> Result<(String, String)> {
    let names: Vec<char> = "abcdefghijklmnopqrstuvwxyz".chars().collect();
    let c = names
        .get(i)
        .ok_or_else(|| Error::Presentation("at most 26 generators are supported".into()))?;
    Ok((c.to_string(), c.to_ascii_uppercase().to_string()))
}

impl Group {
    pub fn new(spec: GroupSpec) -> Result<Self> {
        let (alphabet, kind) = match &spec {
            GroupSpec::Free { rank } => {
                if *rank == 0 {
                    return Err(Error::Presentation("free group of rank 0".into()));
                }
                let mut names = Vec::new();
                let mut inverse = Vec::new();
                for i in 0..*rank {
                    let (lo, up) = lower_upper(i)?;
                    names.push(lo);
                    names.push(up);
                    inverse.push((2 * i + 1) as Letter);
                    inverse.push((2 * i) as Letter);
                }
                (Alphabet::new(names, inverse), Kind::Free)
            }
            GroupSpec::FreeProduct { orders } => {
                if orders.is_empty() {
                    return Err(Error::Presentation("free product with no factors".into()));
                }
                let mut names = Vec::new();
                let mut inverse = Vec::new();
                let mut data = FreeProductData {
                    orders: orders.clone(),
                    factor_letter: Vec::new(),
                    letter_factor: Vec::new(),
                    letter_delta: Vec::new(),
                };
                for (i, &m) in orders.iter().enumerate() {
                    if m < 2 {
                        return Err(Error::Presentation(format!(
                            "cyclic factor of order {m} is trivial"
                        )));
                    }
                    let (lo, up) = lower_upper(i)?;
                    let first = names.len() as Letter;
                    data.factor_letter.push(first);
                    names.push(lo);
                    data.letter_factor.push(i);
                    data.letter_delta.push(1);
                    if m == 2 {
                        inverse.push(first);
                    } else {
                        names.push(up);
                        inverse.push(first + 1);
                        inverse.push(first);
                        data.letter_factor.push(i);
                        data.letter_delta.push(-1);
                    }
                }
                (Alphabet::new(names, inverse), Kind::FreeProduct(data))
            }
            GroupSpec::Lattice { dim } => {
                if *dim == 0 {
                    return Err(Error::Presentation("lattice of dimension 0".into()));
                }
                let mut names = Vec::new();
                let mut inverse = Vec::new();
                for i in 0..*dim {
                    let (lo, up) = lower_upper(i)?;
                    names.push(lo);
                    names.push(up);
                    inverse.push((2 * i + 1) as Letter);
                    inverse.push((2 * i) as Letter);
                }
                (Alphabet::new(names, inverse), Kind::Lattice { dim: *dim })
            }
            GroupSpec::DehnPresentation {
                generators,
                relators,
            } => {
                let mut names = Vec::new();
                let mut inverse = Vec::new();
                for (i, g) in generators.iter().enumerate() {
                    let mut chars = g.chars();
                    let c = match (chars.next(), chars.next()) {
                        (Some(c), None) if c.is_ascii_lowercase() => c,
                        _ => {
                            return Err(Error::Presentation(format!(
                                "generator names must be single lower-case letters, got {g:?}"
                            )))
                        }
                    };
                    names.push(c.to_string());
                    names.push(c.to_ascii_uppercase().to_string());
                    inverse.push((2 * i + 1) as Letter);
                    inverse.push((2 * i) as Letter);
                }
                if names.len() > 2 * 26 {
                    return Err(Error::Presentation("too many generators".into()));
                }
                let alphabet = Alphabet::new(names, inverse);
                let data = dehn::DehnData::new(&alphabet, relators)?;
                (alphabet, Kind::Dehn(data))
            }
        };
        let canonical = serde_json::to_string(&spec)?;
        let hash = crate::io::short_hash(canonical.as_bytes());
        let tag = u32::from_str_radix(&hash[..8], 16).unwrap_or(0);
        Ok(Group {
            spec,
            alphabet,
            kind,
            tag,
            hash,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        })
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Stable content hash of the group description.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn with_enumeration_cap(mut self, cap: usize) -> Self {
        self.enumeration_cap = cap;
        self
    }

    pub fn is_free(&self) -> bool {
        matches!(self.kind, Kind::Free)
    }

    pub fn is_free_product(&self) -> bool {
        matches!(self.kind, Kind::FreeProduct(_))
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self.kind, Kind::Lattice { .. })
    }

    pub fn is_dehn(&self) -> bool {
        matches!(self.kind, Kind::Dehn(_))
    }

    /// True when the Cayley graph is a tree (free groups and free products
    /// of copies of Z/2).
    pub fn cayley_graph_is_tree(&self) -> bool {
        match &self.kind {
            Kind::Free => true,
            Kind::FreeProduct(d) => d.orders.iter().all(|&m| m == 2),
            _ => false,
        }
    }

    /// Groups whose Cayley graph is a tree of cycles, for which first-passage
    /// generating functions factor along normal forms.
    pub fn is_tree_like(&self) -> bool {
        matches!(self.kind, Kind::Free | Kind::FreeProduct(_))
    }

    pub fn identity(&self) -> NormalForm {
        NormalForm {
            tag: self.tag,
            letters: SmallVec::new(),
        }
    }

    /// Parse a word such as `"abA"`, `"a b a^-1"` or `""` into letters.
    pub fn parse_word(&self, s: &str) -> Result<Vec<Letter>> {
        let t = s.trim();
        if t.is_empty() || t == "1" || t == "id" || t == "ε" {
            return Ok(Vec::new());
        }
        if t == "e" && self.alphabet.lookup("e").is_none() {
            return Ok(Vec::new());
        }
        let chars: Vec<char> = t.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() || c == '·' || c == '*' || c == '.' {
                i += 1;
                continue;
            }
            let l = self
                .alphabet
                .lookup(&c.to_string())
                .ok_or_else(|| Error::Alphabet(c.to_string()))?;
            i += 1;
            let rest: String = chars[i..].iter().take(3).collect();
            if rest.starts_with("^-1") {
                out.push(self.alphabet.inverse(l));
                i += 3;
            } else if rest.starts_with("⁻¹") {
                out.push(self.alphabet.inverse(l));
                i += 2;
            } else {
                out.push(l);
            }
        }
        Ok(out)
    }

    /// Parse and normalize a word.
    pub fn element(&self, s: &str) -> Result<NormalForm> {
        let w = self.parse_word(s)?;
        self.normalize(&w)
    }

    /// Canonical geodesic representative of a word.
    pub fn normalize(&self, word: &[Letter]) -> Result<NormalForm> {
        let n = self.alphabet.len();
        if let Some(&bad) = word.iter().find(|&&l| (l as usize) >= n) {
            return Err(Error::Alphabet(format!("letter index {bad}")));
        }
        Ok(self.normalize_unchecked(word))
    }

    /// Rewrap letters already known to be a normal form of this group
    /// (e.g. read back from the distribution cache).
    pub(crate) fn from_canonical_letters(&self, letters: &[Letter]) -> NormalForm {
        self.wrap(SmallVec::from_slice(letters))
    }

    fn wrap(&self, letters: SmallVec<[Letter; 16]>) -> NormalForm {
        NormalForm {
            tag: self.tag,
            letters,
        }
    }

    fn normalize_unchecked(&self, word: &[Letter]) -> NormalForm {
        match &self.kind {
            Kind::Free => {
                let mut out: SmallVec<[Letter; 16]> = SmallVec::with_capacity(word.len());
                for &l in word {
                    if out.last() == Some(&self.alphabet.inverse(l)) {
                        out.pop();
                    } else {
                        out.push(l);
                    }
                }
                self.wrap(out)
            }
            Kind::FreeProduct(d) => {
                // stack of (factor, exponent mod order)
                let mut syl: SmallVec<[(usize, i64); 16]> = SmallVec::new();
                for &l in word {
                    let f = d.letter_factor[l as usize];
                    let m = d.orders[f] as i64;
                    let delta = d.letter_delta[l as usize];
                    match syl.last_mut() {
                        Some((tf, e)) if *tf == f => {
                            *e = (*e + delta).rem_euclid(m);
                            if *e == 0 {
                                syl.pop();
                            }
                        }
                        _ => syl.push((f, delta.rem_euclid(m))),
                    }
                }
                let mut out: SmallVec<[Letter; 16]> = SmallVec::new();
                for (f, e) in syl {
                    let m = d.orders[f] as i64;
                    let a = d.factor_letter[f];
                    if e <= m - e {
                        out.extend(std::iter::repeat_n(a, e as usize));
                    } else {
                        out.extend(std::iter::repeat_n(a + 1, (m - e) as usize));
                    }
                }
                self.wrap(out)
            }
            Kind::Lattice { dim } => {
                let mut coords: SmallVec<[i64; 4]> = SmallVec::from_elem(0, *dim);
                for &l in word {
                    let axis = (l / 2) as usize;
                    coords[axis] += if l % 2 == 0 { 1 } else { -1 };
                }
                self.from_coords(&coords)
            }
            Kind::Dehn(d) => self.wrap(d.canonical(&self.alphabet, word)),
        }
    }

    /// Lattice element from integer coordinates.
    pub fn from_coords(&self, coords: &[i64]) -> NormalForm {
        let mut out: SmallVec<[Letter; 16]> = SmallVec::new();
        for (axis, &c) in coords.iter().enumerate() {
            let l = if c >= 0 { 2 * axis } else { 2 * axis + 1 } as Letter;
            out.extend(std::iter::repeat_n(l, c.unsigned_abs() as usize));
        }
        self.wrap(out)
    }

    /// Coordinates of a lattice element.
    pub fn coords(&self, x: &NormalForm) -> Option<Vec<i64>> {
        match self.kind {
            Kind::Lattice { dim } => {
                let mut c = vec![0i64; dim];
                for &l in x.letters() {
                    c[(l / 2) as usize] += if l % 2 == 0 { 1 } else { -1 };
                }
                Some(c)
            }
            _ => None,
        }
    }

    fn check(&self, x: &NormalForm) -> Result<()> {
        if x.tag != self.tag {
            return Err(Error::Incompatible);
        }
        Ok(())
    }

    /// Group law.
    pub fn mul(&self, x: &NormalForm, y: &NormalForm) -> Result<NormalForm> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.mul_unchecked(x, y))
    }

    pub(crate) fn mul_unchecked(&self, x: &NormalForm, y: &NormalForm) -> NormalForm {
        if y.is_identity() {
            return x.clone();
        }
        if x.is_identity() {
            return y.clone();
        }
        if let Kind::Free = self.kind {
            // cancel the longest matching suffix/prefix pair directly
            let xs = x.letters();
            let ys = y.letters();
            let mut k = 0;
            while k < xs.len()
                && k < ys.len()
                && xs[xs.len() - 1 - k] == self.alphabet.inverse(ys[k])
            {
                k += 1;
            }
            let mut out: SmallVec<[Letter; 16]> = SmallVec::from_slice(&xs[..xs.len() - k]);
            out.extend_from_slice(&ys[k..]);
            return self.wrap(out);
        }
        let mut w: Vec<Letter> = Vec::with_capacity(x.len() + y.len());
        w.extend_from_slice(x.letters());
        w.extend_from_slice(y.letters());
        self.normalize_unchecked(&w)
    }

    /// Right multiplication by one letter.
    pub fn mul_letter(&self, x: &NormalForm, l: Letter) -> NormalForm {
        match &self.kind {
            Kind::Free => {
                let mut out = x.letters.clone();
                if out.last() == Some(&self.alphabet.inverse(l)) {
                    out.pop();
                } else {
                    out.push(l);
                }
                self.wrap(out)
            }
            Kind::Lattice { .. } => {
                // normal forms are per-axis blocks in axis order
                let xs = x.letters();
                let mut out = x.letters.clone();
                if let Some(i) = xs.iter().position(|&m| m == self.alphabet.inverse(l)) {
                    out.remove(i);
                } else {
                    let i = xs.iter().position(|&m| m / 2 > l / 2).unwrap_or(xs.len());
                    out.insert(i, l);
                }
                self.wrap(out)
            }
            _ => {
                let mut w: SmallVec<[Letter; 32]> = SmallVec::from_slice(x.letters());
                w.push(l);
                self.normalize_unchecked(&w)
            }
        }
    }

    pub fn inv(&self, x: &NormalForm) -> NormalForm {
        let w: SmallVec<[Letter; 16]> = x
            .letters()
            .iter()
            .rev()
            .map(|&l| self.alphabet.inverse(l))
            .collect();
        match self.kind {
            Kind::Free => self.wrap(w),
            _ => self.normalize_unchecked(&w),
        }
    }

    /// Word distance d(x, y) = |x⁻¹y|.
    pub fn distance(&self, x: &NormalForm, y: &NormalForm) -> usize {
        self.mul_unchecked(&self.inv(x), y).len()
    }

    /// Human-readable rendering of an element (`e` for the identity).
    pub fn format(&self, x: &NormalForm) -> String {
        self.format_word(x.letters())
    }

    pub fn format_word(&self, w: &[Letter]) -> String {
        if w.is_empty() {
            return "e".to_string();
        }
        w.iter().map(|&l| self.alphabet.name(l)).collect()
    }

    /// Breadth-first enumeration of the spheres S_0, ..., S_n.
    ///
    /// Each element appears exactly once, in the sphere of its word distance
    /// from the identity.
    pub fn spheres(&self, n: usize) -> Result<Vec<Vec<NormalForm>>> {
        let mut layers: Vec<Vec<NormalForm>> = vec![vec![self.identity()]];
        let mut prev: FxHashSet<NormalForm> = FxHashSet::default();
        let mut cur: FxHashSet<NormalForm> = std::iter::once(self.identity()).collect();
        let mut total = 1usize;
        for k in 0..n {
            let mut next_set: FxHashSet<NormalForm> = FxHashSet::default();
            let mut next: Vec<NormalForm> = Vec::new();
            for x in &layers[k] {
                for l in self.alphabet.letters() {
                    let y = self.mul_letter(x, l);
                    if cur.contains(&y) || prev.contains(&y) || next_set.contains(&y) {
                        continue;
                    }
                    next_set.insert(y.clone());
                    next.push(y);
                }
            }
            total += next.len();
            if total > self.enumeration_cap {
                return Err(Error::Resource(format!(
                    "ball of radius {} exceeds the enumeration cap of {} elements",
                    k + 1,
                    self.enumeration_cap
                )));
            }
            prev = cur;
            cur = next_set;
            layers.push(next);
        }
        Ok(layers)
    }

    /// The sphere S_n of radius `n` around the identity.
    pub fn sphere(&self, n: usize) -> Result<Vec<NormalForm>> {
        let mut layers = self.spheres(n)?;
        Ok(layers.pop().unwrap_or_default())
    }

    /// The ball B(e, n) as a flat list ordered by distance.
    pub fn ball(&self, n: usize) -> Result<Vec<NormalForm>> {
        Ok(self.spheres(n)?.into_iter().flatten().collect())
    }

    /// Independent check of Dehn-reduced lengths against a breadth-first
    /// search that identifies elements through the word problem only.
    pub fn validate_dehn(&self, radius: usize) -> Result<DehnValidation> {
        match &self.kind {
            Kind::Dehn(d) => d.validate(self, radius),
            _ => Err(Error::Unsupported(
                "Dehn validation only applies to presentations".into(),
            )),
        }
    }

    /// Longest piece of the symmetrized relator set (Dehn presentations only).
    pub fn max_piece(&self) -> Option<usize> {
        match &self.kind {
            Kind::Dehn(d) => Some(d.max_piece),
            _ => None,
        }
    }

    /// Word-problem test that does not go through canonical forms.
    pub fn words_equal(&self, u: &[Letter], v: &[Letter]) -> bool {
        match &self.kind {
            Kind::Dehn(d) => d.words_equal(&self.alphabet, u, v),
            _ => self.normalize_unchecked(u) == self.normalize_unchecked(v),
        }
    }

    /// Orders of the cyclic factors (free products only).
    pub fn factor_orders(&self) -> Option<&[u32]> {
        match &self.kind {
            Kind::FreeProduct(d) => Some(&d.orders),
            _ => None,
        }
    }

    /// Factor index and signed step (+1 or -1) of a letter in a free product
    /// or free group. Free group generator `i` is treated as an infinite
    /// cyclic factor.
    pub fn letter_factor(&self, l: Letter) -> Option<(usize, i64)> {
        match &self.kind {
            Kind::Free => Some(((l / 2) as usize, if l % 2 == 0 { 1 } else { -1 })),
            Kind::FreeProduct(d) => Some((d.letter_factor[l as usize], d.letter_delta[l as usize])),
            _ => None,
        }
    }

    /// Number of free factors of a tree-like group.
    pub fn factor_count(&self) -> Option<usize> {
        match &self.kind {
            Kind::Free => Some(self.alphabet.len() / 2),
            Kind::FreeProduct(d) => Some(d.orders.len()),
            _ => None,
        }
    }

    /// Order of a factor, `None` meaning infinite cyclic.
    pub fn factor_order(&self, f: usize) -> Option<u32> {
        match &self.kind {
            Kind::Free => None,
            Kind::FreeProduct(d) => Some(d.orders[f]),
            _ => None,
        }
    }

    /// Syllable decomposition of a normal form in a tree-like group:
    /// `(factor, exponent)` with exponents taken modulo the factor order
    /// (free factors keep signed exponents).
    pub fn syllables(&self, x: &NormalForm) -> Vec<(usize, i64)> {
        let mut out: Vec<(usize, i64)> = Vec::new();
        for &l in x.letters() {
            let Some((f, d)) = self.letter_factor(l) else {
                return Vec::new();
            };
            match out.last_mut() {
                Some((lf, e)) if *lf == f => *e += d,
                _ => out.push((f, d)),
            }
        }
        if let Kind::FreeProduct(d) = &self.kind {
            for (f, e) in out.iter_mut() {
                *e = e.rem_euclid(d.orders[*f] as i64);
            }
        }
        out
    }
}
