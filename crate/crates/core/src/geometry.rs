//! The mixed-dimensional stratification: bulk rectangles, fracture segments
//! and intersection points, with their adjacency and relative orientation.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

const GEOM_TOL: f64 = 1e-12;

/// Embedding of a subdomain in the ambient plane.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Axis-aligned rectangle `[min.x, max.x] x [min.y, max.y]`.
    Rect {
        min: Point2,
        max: Point2,
    },
    /// Straight segment, oriented from `from` to `to`.
    Segment {
        from: Point2,
        to: Point2,
    },
    Point(Point2),
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Rect { .. } => 2,
            Shape::Segment { .. } => 1,
            Shape::Point(_) => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subdomain {
    pub id: usize,
    pub dim: usize,
    /// Cross-sectional measure: 1 in the bulk, width on fractures, area at intersections.
    pub aperture: f64,
    pub shape: Shape,
}

impl Subdomain {
    /// Unit tangent of a segment subdomain.
    pub fn tangent(&self) -> Option<Point2> {
        match self.shape {
            Shape::Segment { from, to } => {
                let d = [to[0] - from[0], to[1] - from[1]];
                let len = d[0].hypot(d[1]);
                Some([d[0] / len, d[1] / len])
            }
            _ => None,
        }
    }

    /// Fixed unit normal of a segment subdomain, the tangent rotated clockwise.
    ///
    /// Traces of bulk 1-forms onto the segment are normal components against
    /// this vector.
    pub fn normal(&self) -> Option<Point2> {
        self.tangent().map(|t| [t[1], -t[0]])
    }
}

/// Stratification `{Omega_i^d}` of a planar domain.
#[derive(Clone, Debug)]
pub struct StratifiedGeometry {
    /// Ambient dimension.
    pub n: usize,
    /// Bounding box of the embedding domain.
    pub bounds: (Point2, Point2),
    pub subdomains: Vec<Subdomain>,
    /// `up_neighbors[i]`: ids of the (d+1)-dimensional subdomains adjacent to `i`.
    pub up_neighbors: Vec<Vec<usize>>,
    /// `down_neighbors[i]`: ids of the (d-1)-dimensional subdomains on the boundary of `i`.
    pub down_neighbors: Vec<Vec<usize>>,
    /// `(lower, upper) -> +1/-1`, relative orientation of `lower` as a boundary piece of `upper`.
    ///
    /// For a fracture and a bulk side: +1 when the fracture normal points into the bulk side.
    /// For an intersection and a fracture branch: +1 when the point is the head of the branch.
    pub orientation: BTreeMap<(usize, usize), i8>,
}

/// A broken invariant reported by [`StratifiedGeometry::validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DimensionOutOfRange {
        id: usize,
        dim: usize,
    },
    Aperture {
        id: usize,
        aperture: f64,
    },
    /// `upper` is listed as a neighbor of `lower` but the dimensions differ by other than one.
    DimensionGrading {
        lower: usize,
        upper: usize,
    },
    /// `j` appears in one adjacency map of `i` without the mirrored entry.
    Asymmetric {
        lower: usize,
        upper: usize,
    },
    Orientation {
        lower: usize,
        upper: usize,
        value: i8,
    },
    MissingOrientation {
        lower: usize,
        upper: usize,
    },
    UnknownSubdomain {
        id: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DimensionOutOfRange { id, dim } => {
                write!(f, "subdomain {id}: dimension {dim} outside [0, n]")
            }
            Violation::Aperture { id, aperture } => {
                write!(f, "subdomain {id}: invalid aperture {aperture}")
            }
            Violation::DimensionGrading { lower, upper } => {
                write!(
                    f,
                    "({lower}, {upper}): adjacent subdomains must differ by one dimension"
                )
            }
            Violation::Asymmetric { lower, upper } => {
                write!(f, "({lower}, {upper}): adjacency is not symmetric")
            }
            Violation::Orientation { lower, upper, value } => {
                write!(f, "({lower}, {upper}): orientation {value} is not +1 or -1")
            }
            Violation::MissingOrientation { lower, upper } => {
                write!(f, "({lower}, {upper}): missing orientation")
            }
            Violation::UnknownSubdomain { id } => write!(f, "unknown subdomain id {id}"),
        }
    }
}

impl StratifiedGeometry {
    /// Builds a geometry from shapes, inferring adjacency and orientation.
    ///
    /// Ids follow the order of `parts`. A segment is adjacent to every rectangle
    /// whose boundary contains it; a point is adjacent to every segment having it
    /// as an endpoint.
    pub fn from_shapes(bounds: (Point2, Point2), parts: Vec<(Shape, f64)>) -> Result<Self> {
        let subdomains: Vec<Subdomain> = parts
            .into_iter()
            .enumerate()
            .map(|(id, (shape, aperture))| Subdomain {
                id,
                dim: shape.dim(),
                aperture,
                shape,
            })
            .collect();
        let count = subdomains.len();
        let mut up_neighbors = vec![Vec::new(); count];
        let mut down_neighbors = vec![Vec::new(); count];
        let mut orientation = BTreeMap::new();

        for lower in &subdomains {
            for upper in &subdomains {
                if upper.dim != lower.dim + 1 {
                    continue;
                }
                if let Some(sign) = incidence(lower, upper) {
                    up_neighbors[lower.id].push(upper.id);
                    down_neighbors[upper.id].push(lower.id);
                    orientation.insert((lower.id, upper.id), sign);
                }
            }
        }

        let geometry = StratifiedGeometry {
            n: 2,
            bounds,
            subdomains,
            up_neighbors,
            down_neighbors,
            orientation,
        };
        let violations = geometry.validate();
        if !violations.is_empty() {
            let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidGeometry(text.join("; ")));
        }
        Ok(geometry)
    }

    /// Unit square cut by a vertical fracture at `x = fx` and a horizontal one
    /// at `y = fy`, both crossing the whole domain.
    ///
    /// Ids: quadrants 0..4 (lower-left, lower-right, upper-left, upper-right),
    /// fracture branches 4..8 (vertical bottom, vertical top, horizontal left,
    /// horizontal right), intersection 8.
    pub fn cross(fx: f64, fy: f64, aperture: f64) -> Result<Self> {
        if !(fx > 0.0 && fx < 1.0 && fy > 0.0 && fy < 1.0) {
            return Err(Error::InvalidGeometry(format!(
                "fracture positions ({fx}, {fy}) must lie in (0, 1)"
            )));
        }
        if !(aperture > 0.0 && aperture.is_finite()) {
            return Err(Error::InvalidGeometry(format!("aperture {aperture} must be positive")));
        }
        let c = [fx, fy];
        let parts = vec![
            (rect([0.0, 0.0], [fx, fy]), 1.0),
            (rect([fx, 0.0], [1.0, fy]), 1.0),
            (rect([0.0, fy], [fx, 1.0]), 1.0),
            (rect([fx, fy], [1.0, 1.0]), 1.0),
            (segment([fx, 0.0], c), aperture),
            (segment(c, [fx, 1.0]), aperture),
            (segment([0.0, fy], c), aperture),
            (segment(c, [1.0, fy]), aperture),
            (Shape::Point(c), aperture * aperture),
        ];
        Self::from_shapes(([0.0, 0.0], [1.0, 1.0]), parts)
    }

    /// The unfractured unit square.
    pub fn unit_square() -> Self {
        Self::from_shapes(([0.0, 0.0], [1.0, 1.0]), vec![(rect([0.0, 0.0], [1.0, 1.0]), 1.0)])
            .expect("unit square is a valid geometry")
    }

    /// Unit square split by a single vertical fracture at `x = fx`.
    ///
    /// Ids: left half 0, right half 1, fracture 2.
    pub fn split_square(fx: f64, aperture: f64) -> Result<Self> {
        Self::from_shapes(
            ([0.0, 0.0], [1.0, 1.0]),
            vec![
                (rect([0.0, 0.0], [fx, 1.0]), 1.0),
                (rect([fx, 0.0], [1.0, 1.0]), 1.0),
                (segment([fx, 0.0], [fx, 1.0]), aperture),
            ],
        )
    }

    /// The fracture network of [`StratifiedGeometry::cross`] without the bulk.
    ///
    /// Ids: branches 0..4 in the same order as in the cross, intersection 4.
    pub fn fracture_network(fx: f64, fy: f64, aperture: f64) -> Result<Self> {
        let c = [fx, fy];
        Self::from_shapes(
            ([0.0, 0.0], [1.0, 1.0]),
            vec![
                (segment([fx, 0.0], c), aperture),
                (segment(c, [fx, 1.0]), aperture),
                (segment([0.0, fy], c), aperture),
                (segment(c, [1.0, fy]), aperture),
                (Shape::Point(c), aperture * aperture),
            ],
        )
    }

    pub fn subdomain(&self, id: usize) -> &Subdomain {
        &self.subdomains[id]
    }

    pub fn ids_of_dim(&self, dim: usize) -> impl Iterator<Item = usize> + '_ {
        self.subdomains.iter().filter(move |s| s.dim == dim).map(|s| s.id)
    }

    pub fn orientation(&self, lower: usize, upper: usize) -> Option<i8> {
        self.orientation.get(&(lower, upper)).copied()
    }

    /// All lower-dimensional subdomains reachable through repeated
    /// down-neighbor steps, each listed once, in increasing id order.
    pub fn lower_closure(&self, id: usize) -> Vec<usize> {
        let mut seen = vec![false; self.subdomains.len()];
        let mut stack = self.down_neighbors[id].clone();
        while let Some(j) = stack.pop() {
            if !seen[j] {
                seen[j] = true;
                stack.extend(self.down_neighbors[j].iter().copied());
            }
        }
        (0..seen.len()).filter(|&j| seen[j]).collect()
    }

    /// Checks every invariant of the stratification; an empty list means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let count = self.subdomains.len();
        for s in &self.subdomains {
            if s.dim > self.n {
                out.push(Violation::DimensionOutOfRange { id: s.id, dim: s.dim });
            }
            let ok = if s.dim == self.n {
                s.aperture == 1.0
            } else {
                s.aperture > 0.0 && s.aperture.is_finite()
            };
            if !ok {
                out.push(Violation::Aperture {
                    id: s.id,
                    aperture: s.aperture,
                });
            }
        }
        for (i, ups) in self.up_neighbors.iter().enumerate() {
            for &j in ups {
                if j >= count {
                    out.push(Violation::UnknownSubdomain { id: j });
                    continue;
                }
                if self.subdomains[j].dim != self.subdomains[i].dim + 1 {
                    out.push(Violation::DimensionGrading { lower: i, upper: j });
                }
                if !self.down_neighbors.get(j).is_some_and(|d| d.contains(&i)) {
                    out.push(Violation::Asymmetric { lower: i, upper: j });
                }
                match self.orientation(i, j) {
                    Some(1) | Some(-1) => {}
                    Some(value) => out.push(Violation::Orientation {
                        lower: i,
                        upper: j,
                        value,
                    }),
                    None => out.push(Violation::MissingOrientation { lower: i, upper: j }),
                }
            }
        }
        for (j, downs) in self.down_neighbors.iter().enumerate() {
            for &i in downs {
                if i >= count {
                    out.push(Violation::UnknownSubdomain { id: i });
                    continue;
                }
                if self.subdomains[i].dim + 1 != self.subdomains[j].dim {
                    out.push(Violation::DimensionGrading { lower: i, upper: j });
                }
                if !self.up_neighbors.get(i).is_some_and(|u| u.contains(&j)) {
                    out.push(Violation::Asymmetric { lower: i, upper: j });
                }
            }
        }
        out
    }
}

/// Builds the benchmark stratification of two fractures crossing at a right angle.
pub fn build_cross_geometry(fx: f64, fy: f64, aperture: f64) -> Result<StratifiedGeometry> {
    StratifiedGeometry::cross(fx, fy, aperture)
}

fn rect(min: Point2, max: Point2) -> Shape {
    Shape::Rect { min, max }
}

fn segment(from: Point2, to: Point2) -> Shape {
    Shape::Segment { from, to }
}

fn close(a: Point2, b: Point2) -> bool {
    (a[0] - b[0]).abs() <= GEOM_TOL && (a[1] - b[1]).abs() <= GEOM_TOL
}

/// Orientation of `lower` on the boundary of `upper`, or `None` when not incident.
fn incidence(lower: &Subdomain, upper: &Subdomain) -> Option<i8> {
    match (&lower.shape, &upper.shape) {
        (Shape::Segment { from, to }, Shape::Rect { min, max }) => {
            if !segment_on_rect_boundary(*from, *to, *min, *max) {
                return None;
            }
            let n = lower.normal()?;
            let center = [0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1])];
            let side = (center[0] - from[0]) * n[0] + (center[1] - from[1]) * n[1];
            Some(if side > 0.0 { 1 } else { -1 })
        }
        (Shape::Point(p), Shape::Segment { from, to }) => {
            if close(*p, *to) {
                Some(1)
            } else if close(*p, *from) {
                Some(-1)
            } else {
                None
            }
        }
        _ => None,
    }
}

fn segment_on_rect_boundary(a: Point2, b: Point2, min: Point2, max: Point2) -> bool {
    let within = |p: Point2| {
        p[0] >= min[0] - GEOM_TOL && p[0] <= max[0] + GEOM_TOL && p[1] >= min[1] - GEOM_TOL && p[1] <= max[1] + GEOM_TOL
    };
    if !within(a) || !within(b) {
        return false;
    }
    let on_x = |x: f64| (a[0] - x).abs() <= GEOM_TOL && (b[0] - x).abs() <= GEOM_TOL;
    let on_y = |y: f64| (a[1] - y).abs() <= GEOM_TOL && (b[1] - y).abs() <= GEOM_TOL;
    on_x(min[0]) || on_x(max[0]) || on_y(min[1]) || on_y(max[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_counts_and_apertures() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        assert!(g.validate().is_empty());
        assert_eq!(g.ids_of_dim(2).count(), 4);
        assert_eq!(g.ids_of_dim(1).count(), 4);
        assert_eq!(g.ids_of_dim(0).count(), 1);
        for f in g.ids_of_dim(1) {
            assert_eq!(g.up_neighbors[f].len(), 2);
            assert_eq!(g.subdomain(f).aperture, 1e-3);
        }
        let x = g.ids_of_dim(0).next().unwrap();
        assert_eq!(g.up_neighbors[x].len(), 4);
        assert!((g.subdomain(x).aperture - 1e-6).abs() < 1e-20);
    }

    #[test]
    fn unit_aperture_same_topology() {
        let a = build_cross_geometry(0.5, 0.5, 1.0).unwrap();
        let b = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        assert_eq!(a.up_neighbors, b.up_neighbors);
        assert_eq!(a.down_neighbors, b.down_neighbors);
        assert_eq!(a.orientation, b.orientation);
    }

    #[test]
    fn off_center_intersection() {
        let g = build_cross_geometry(0.25, 0.75, 1e-3).unwrap();
        assert_eq!(g.subdomains.len(), 9);
        assert_eq!(g.subdomain(8).shape, Shape::Point([0.25, 0.75]));
        assert!(g.validate().is_empty());
    }

    #[test]
    fn fracture_sides_have_opposite_orientation() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        for f in g.ids_of_dim(1) {
            let signs: Vec<i8> = g.up_neighbors[f]
                .iter()
                .map(|&j| g.orientation(f, j).unwrap())
                .collect();
            assert_eq!(signs.iter().map(|&s| s as i32).sum::<i32>(), 0);
        }
    }

    #[test]
    fn grading_violation_detected() {
        let mut g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        // list the intersection as an up-neighbor of a quadrant
        g.up_neighbors[0].push(8);
        g.down_neighbors[8].push(0);
        g.orientation.insert((0, 8), 1);
        let v = g.validate();
        let grading: Vec<_> = v
            .iter()
            .filter(|x| matches!(x, Violation::DimensionGrading { .. }))
            .collect();
        assert_eq!(grading.len(), 2, "{v:?}");
        assert!(v.iter().all(|x| matches!(
            x,
            Violation::DimensionGrading { lower: 0, upper: 8 } | Violation::DimensionGrading { lower: 8, upper: 0 }
        )));
    }

    #[test]
    fn zero_orientation_detected() {
        let mut g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        g.orientation.insert((4, 0), 0);
        assert_eq!(
            g.validate(),
            vec![Violation::Orientation {
                lower: 4,
                upper: 0,
                value: 0
            }]
        );
    }

    #[test]
    fn closure_reaches_intersection() {
        let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
        assert_eq!(g.lower_closure(0), vec![4, 6, 8]);
        assert_eq!(g.lower_closure(4), vec![8]);
        assert!(g.lower_closure(8).is_empty());
    }
}
