//! Polynomial form families, per-subdomain space assignments and their
//! sequence and trace compatibility.

use std::fmt;

use crate::element::ElementKind;
use crate::error::{Error, Result};
use crate::geometry::StratifiedGeometry;
use crate::mesh::MixedMesh;

/// Full (`P_r`) or reduced (`P_r^-`) polynomial form family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpaceFamily {
    Full,
    Reduced,
}

impl fmt::Display for SpaceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceFamily::Full => "full",
            SpaceFamily::Reduced => "reduced",
        })
    }
}

/// A polynomial form space `P_r^m Lambda^k` on a `dim`-simplex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LocalSpace {
    pub family: SpaceFamily,
    pub order: u32,
}

impl LocalSpace {
    pub fn new(family: SpaceFamily, order: u32) -> Self {
        LocalSpace { family, order }
    }

    /// Canonical representative: `P_r^- Lambda^0 = P_r Lambda^0` and
    /// `P_r Lambda^d = P_{r+1}^- Lambda^d`.
    pub fn normalized(self, form: usize, dim: usize) -> Self {
        match self.family {
            _ if dim == 0 => LocalSpace::new(SpaceFamily::Reduced, 1),
            SpaceFamily::Reduced if form == 0 => LocalSpace::new(SpaceFamily::Full, self.order),
            SpaceFamily::Full if form == dim => LocalSpace::new(SpaceFamily::Reduced, self.order + 1),
            _ => self,
        }
    }

    /// Position in the chain `P_1^- < P_1 < P_2^- < P_2 < ...`.
    fn rank(self) -> u32 {
        match self.family {
            SpaceFamily::Full => 2 * self.order,
            SpaceFamily::Reduced => 2 * self.order - 1,
        }
    }

    /// Containment of normalized spaces of the same form degree.
    pub fn contained_in(self, other: LocalSpace, form: usize, dim: usize) -> bool {
        self.normalized(form, dim).rank() <= other.normalized(form, dim).rank()
    }
}

impl fmt::Display for LocalSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let minus = if self.family == SpaceFamily::Reduced { "-" } else { "" };
        write!(f, "P{}{minus}", self.order)
    }
}

/// Family and order of the traces of `P_r^m Lambda^k(T^d)` on `e`-dimensional
/// faces, as a space of the matching mixed-dimensional degree there.
///
/// Traces of the reduced family keep their order; each step of codimension
/// raises the order of the full family by one, so that the lower-dimensional
/// derivative can absorb the full polynomial normal trace.
pub fn trace_space(family: SpaceFamily, r: u32, k: usize, d: usize, e: usize) -> Result<(SpaceFamily, u32)> {
    if r == 0 {
        return Err(Error::InvalidTrace("polynomial order must be at least 1".into()));
    }
    if k > d {
        return Err(Error::InvalidTrace(format!(
            "no {k}-forms on a {d}-dimensional subdomain"
        )));
    }
    if e >= d {
        return Err(Error::InvalidTrace(format!(
            "target dimension {e} is not below source dimension {d}"
        )));
    }
    let drop = d - e;
    if k < drop {
        return Err(Error::InvalidTrace(format!(
            "the trace of a {k}-form from dimension {d} vanishes on dimension {e}"
        )));
    }
    let target_form = k - drop;
    let source = LocalSpace::new(family, r).normalized(k, d);
    let lifted = match source.family {
        SpaceFamily::Reduced => source,
        SpaceFamily::Full => LocalSpace::new(SpaceFamily::Full, source.order + drop as u32),
    };
    let out = lifted.normalized(target_form, e);
    Ok((out.family, out.order))
}

/// Discretization methods for the fractured Darcy problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Primal,
    Mixed1,
    Mixed2,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Primal, Method::Mixed1, Method::Mixed2];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Primal => "primal",
            Method::Mixed1 => "mixed1",
            Method::Mixed2 => "mixed2",
        }
    }

    pub fn is_mixed(&self) -> bool {
        !matches!(self, Method::Primal)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "primal" => Ok(Method::Primal),
            "mixed1" | "mixed-1" | "first" => Ok(Method::Mixed1),
            "mixed2" | "mixed-2" | "second" => Ok(Method::Mixed2),
            other => Err(format!("unknown method `{other}` (expected primal, mixed1 or mixed2)")),
        }
    }
}

/// Choice of `(m, r)` for every block of every mixed-dimensional degree.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceAssignment {
    pub method: Method,
    pub n: usize,
    dims: Vec<usize>,
    /// `spaces[i][k]`: the space of the degree-k block on subdomain i.
    spaces: Vec<Vec<Option<LocalSpace>>>,
}

/// Local form degree of the degree-`k` block on a `d`-dimensional subdomain.
pub fn local_degree(n: usize, d: usize, k: usize) -> Option<usize> {
    (k + d).checked_sub(n).filter(|&j| j <= d)
}

impl SpaceAssignment {
    /// Assignment from a rule `(dim, local degree) -> space`.
    pub fn from_rule(method: Method, geometry: &StratifiedGeometry, rule: impl Fn(usize, usize) -> LocalSpace) -> Self {
        let n = geometry.n;
        let dims: Vec<usize> = geometry.subdomains.iter().map(|s| s.dim).collect();
        let spaces = dims
            .iter()
            .map(|&d| (0..=n).map(|k| local_degree(n, d, k).map(|j| rule(d, j))).collect())
            .collect();
        SpaceAssignment {
            method,
            n,
            dims,
            spaces,
        }
    }

    pub fn num_subdomains(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, i: usize) -> usize {
        self.dims[i]
    }

    pub fn space(&self, i: usize, k: usize) -> Option<LocalSpace> {
        self.spaces.get(i).and_then(|s| s.get(k).copied().flatten())
    }

    pub fn set(&mut self, i: usize, k: usize, space: LocalSpace) {
        self.spaces[i][k] = Some(space);
    }

    /// Finite element realizing the degree-`k` block on subdomain `i`.
    pub fn element(&self, i: usize, k: usize) -> Result<Option<ElementKind>> {
        let d = self.dims[i];
        let Some(space) = self.space(i, k) else {
            return Ok(None);
        };
        let j = local_degree(self.n, d, k).expect("block exists");
        let s = space.normalized(j, d);
        let kind = match (d, j, s.family, s.order) {
            (0, _, _, _) => ElementKind::Point,
            (_, 0, SpaceFamily::Full, r @ 1..=2) => ElementKind::Lagrange(r as u8),
            (_, j, SpaceFamily::Reduced, r @ 1..=2) if j == d => ElementKind::Disc(r as u8 - 1),
            (2, 1, SpaceFamily::Reduced, 1) => ElementKind::RaviartThomas,
            (2, 1, SpaceFamily::Full, 1) => ElementKind::Bdm,
            _ => {
                return Err(Error::UnsupportedSpace(format!(
                    "{s} for {j}-forms on {d}-dimensional subdomain {i}"
                )))
            }
        };
        Ok(Some(kind))
    }

    /// Element of the pressure unknowns used by the solver. The primal method
    /// uses continuous linear Lagrange on every subdomain.
    pub fn pressure_element(&self, i: usize) -> Result<ElementKind> {
        if self.method == Method::Primal {
            return Ok(if self.dims[i] == 0 {
                ElementKind::Point
            } else {
                ElementKind::Lagrange(1)
            });
        }
        Ok(self
            .element(i, self.n)?
            .expect("top-degree blocks exist on every subdomain"))
    }

    /// Block offsets of the degree-`k` cochain space on `mesh`.
    pub fn layout(&self, mesh: &MixedMesh, k: usize) -> Result<DofLayout> {
        let mut blocks = Vec::with_capacity(self.dims.len());
        let mut offset = 0;
        for i in 0..self.dims.len() {
            match self.element(i, k)? {
                Some(kind) => {
                    let len = kind.block_len(mesh.mesh(i));
                    blocks.push(Some(Block { kind, offset, len }));
                    offset += len;
                }
                None => blocks.push(None),
            }
        }
        Ok(DofLayout { blocks, total: offset })
    }

    /// Layout of the primal pressure unknowns.
    pub fn pressure_layout(&self, mesh: &MixedMesh) -> Result<DofLayout> {
        let mut blocks = Vec::with_capacity(self.dims.len());
        let mut offset = 0;
        for i in 0..self.dims.len() {
            let kind = self.pressure_element(i)?;
            let len = kind.block_len(mesh.mesh(i));
            blocks.push(Some(Block { kind, offset, len }));
            offset += len;
        }
        Ok(DofLayout { blocks, total: offset })
    }
}

impl fmt::Display for SpaceAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>9}  {:>3}  {:>6}  {:>7}  {:>5}  element",
            "subdomain", "dim", "degree", "family", "order"
        )?;
        for i in 0..self.dims.len() {
            for k in 0..=self.n {
                if let Some(s) = self.space(i, k) {
                    let element = match self.element(i, k) {
                        Ok(Some(kind)) => format!("{kind:?}"),
                        _ => "-".into(),
                    };
                    writeln!(
                        f,
                        "{i:>9}  {:>3}  {k:>6}  {:>7}  {:>5}  {element}",
                        self.dims[i],
                        s.family.to_string(),
                        s.order
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Placement of one subdomain's block inside a global vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub kind: ElementKind,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofLayout {
    pub blocks: Vec<Option<Block>>,
    pub total: usize,
}

impl DofLayout {
    pub fn block(&self, i: usize) -> Option<Block> {
        self.blocks.get(i).copied().flatten()
    }

    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.block(i).map_or(0..0, |b| b.offset..b.offset + b.len)
    }
}

/// Canonical space assignment of each method.
///
/// The primal method shares the lowest-order complex of `Mixed1` for its
/// complex diagnostics; its pressure unknowns are linear Lagrange everywhere.
pub fn canonical_assignment(method: Method, geometry: &StratifiedGeometry, n: usize) -> Result<SpaceAssignment> {
    if n != 2 || geometry.n != 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    use SpaceFamily::*;
    Ok(match method {
        Method::Primal | Method::Mixed1 => {
            SpaceAssignment::from_rule(method, geometry, |_, _| LocalSpace::new(Reduced, 1))
        }
        Method::Mixed2 => SpaceAssignment::from_rule(method, geometry, |d, j| match (d, j) {
            (0, _) => LocalSpace::new(Reduced, 1),
            (2, 0) => LocalSpace::new(Full, 2),
            (2, 1) => LocalSpace::new(Full, 1),
            (2, _) => LocalSpace::new(Reduced, 1),
            (_, 0) => LocalSpace::new(Full, 2),
            _ => LocalSpace::new(Full, 1),
        }),
    })
}

/// A failed sequence or trace requirement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpaceViolation {
    /// `d` maps the degree-`k` space of subdomain `i` outside its degree-`k+1` space.
    Sequence {
        subdomain: usize,
        degree: usize,
        from: LocalSpace,
        to: LocalSpace,
    },
    /// The trace of the upper space is not contained in the lower space.
    Trace {
        lower: usize,
        upper: usize,
        degree: usize,
        required: LocalSpace,
        found: LocalSpace,
    },
    /// The trace cannot be formed at all.
    Untraceable {
        lower: usize,
        upper: usize,
        degree: usize,
        reason: String,
    },
    MissingBlock {
        subdomain: usize,
        degree: usize,
    },
}

impl fmt::Display for SpaceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceViolation::Sequence {
                subdomain,
                degree,
                from,
                to,
            } => write!(
                f,
                "subdomain {subdomain}: d maps {from} at degree {degree} outside {to} at degree {}",
                degree + 1
            ),
            SpaceViolation::Trace {
                lower,
                upper,
                degree,
                required,
                found,
            } => write!(
                f,
                "trace of subdomain {upper} onto {lower} at degree {degree} needs {required} but {found} is assigned"
            ),
            SpaceViolation::Untraceable {
                lower,
                upper,
                degree,
                reason,
            } => {
                write!(
                    f,
                    "trace of subdomain {upper} onto {lower} at degree {degree}: {reason}"
                )
            }
            SpaceViolation::MissingBlock { subdomain, degree } => {
                write!(f, "subdomain {subdomain} has no space for degree {degree}")
            }
        }
    }
}

/// Spaces reachable by `d` from `(m, r)`: `P_{r-1}` or `P_r^-`.
fn sequence_targets(s: LocalSpace) -> Vec<LocalSpace> {
    let mut out = vec![LocalSpace::new(SpaceFamily::Reduced, s.order)];
    if s.order >= 2 {
        out.push(LocalSpace::new(SpaceFamily::Full, s.order - 1));
    }
    out
}

/// Checks the per-subdomain sequence rules and the trace containments.
pub fn check_compatibility(assign: &SpaceAssignment, geometry: &StratifiedGeometry) -> Vec<SpaceViolation> {
    let n = assign.n;
    let mut out = Vec::new();
    for s in &geometry.subdomains {
        let (i, d) = (s.id, s.dim);
        for k in 0..=n {
            let present = assign.space(i, k);
            if local_degree(n, d, k).is_some() && present.is_none() {
                out.push(SpaceViolation::MissingBlock {
                    subdomain: i,
                    degree: k,
                });
            }
        }
        if d == 0 {
            continue;
        }
        for k in 0..n {
            let (Some(from), Some(to)) = (assign.space(i, k), assign.space(i, k + 1)) else {
                continue;
            };
            let j = local_degree(n, d, k).unwrap();
            let from_n = from.normalized(j, d);
            let to_n = to.normalized(j + 1, d);
            let ok = sequence_targets(from_n)
                .into_iter()
                .any(|t| t.normalized(j + 1, d) == to_n);
            if !ok {
                out.push(SpaceViolation::Sequence {
                    subdomain: i,
                    degree: k,
                    from,
                    to,
                });
            }
        }
    }
    for s in &geometry.subdomains {
        let lower = s.id;
        let e = s.dim;
        if e == 0 {
            // a point carries a single scalar, which holds any trace value
            continue;
        }
        for &upper in &geometry.up_neighbors[lower] {
            let d = geometry.subdomain(upper).dim;
            for k in 0..=n {
                let (Some(up), Some(low)) = (assign.space(upper, k), assign.space(lower, k)) else {
                    continue;
                };
                let j = local_degree(n, d, k).unwrap();
                match trace_space(up.family, up.order, j, d, e) {
                    Ok((family, order)) => {
                        let required = LocalSpace::new(family, order);
                        let je = j - (d - e);
                        if !required.contained_in(low, je, e) {
                            out.push(SpaceViolation::Trace {
                                lower,
                                upper,
                                degree: k,
                                required,
                                found: low,
                            });
                        }
                    }
                    Err(err) => out.push(SpaceViolation::Untraceable {
                        lower,
                        upper,
                        degree: k,
                        reason: err.to_string(),
                    }),
                }
            }
        }
    }
    out
}

/// Turns the first violation into an error naming the failing pair.
pub fn require_compatible(assign: &SpaceAssignment, geometry: &StratifiedGeometry) -> Result<()> {
    match check_compatibility(assign, geometry).into_iter().next() {
        None => Ok(()),
        Some(v) => {
            let (lower, upper) = match &v {
                SpaceViolation::Trace { lower, upper, .. } | SpaceViolation::Untraceable { lower, upper, .. } => {
                    (*lower, *upper)
                }
                SpaceViolation::Sequence { subdomain, .. } | SpaceViolation::MissingBlock { subdomain, .. } => {
                    (*subdomain, *subdomain)
                }
            };
            Err(Error::TraceIncompatible {
                lower,
                upper,
                reason: v.to_string(),
            })
        }
    }
}
