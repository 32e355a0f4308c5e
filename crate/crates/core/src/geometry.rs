//! Planar qubit cross-sections.
//!
//! A design is described by a handful of [`DesignParams`] and materialised by
//! [`build_layout`] into a [`LayoutSpec`]: polygons for the substrate, the
//! vacuum above it and every conductor, plus tagged straight segments along
//! each material boundary. The cross-section is taken perpendicular to the
//! fingers of an interdigitated capacitor, or across the gap of a pad pair.
//!
//! Coordinates are in metres. The substrate top plane is `y = 0`; metal sits
//! on `0 <= y <= metal_thickness`; exposed gaps are recessed to `y = -trench`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::units::{mhz, um};

/// Multiple of the electrode extent used for the lateral and vertical size of
/// the simulation box.
pub const BOX_TO_EXTENT: f64 = 10.0;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    pub fn midpoint(self, o: Point) -> Point {
        Point::new(0.5 * (self.x + o.x), 0.5 * (self.y + o.y))
    }

    /// Integer key on a 0.1 pm lattice, used to identify coincident points
    /// produced by different arithmetic paths.
    pub(crate) fn key(self) -> (i64, i64) {
        ((self.x * 1e13).round() as i64, (self.y * 1e13).round() as i64)
    }
}

/// Distance from `p` to the closed segment `a`-`b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Rect { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p.x >= self.min.x - tol
            && p.x <= self.max.x + tol
            && p.y >= self.min.y - tol
            && p.y <= self.max.y + tol
    }

    pub fn on_boundary(&self, p: Point, tol: f64) -> bool {
        self.contains(p, tol)
            && ((p.x - self.min.x).abs() <= tol
                || (p.x - self.max.x).abs() <= tol
                || (p.y - self.min.y).abs() <= tol
                || (p.y - self.max.y).abs() <= tol)
    }

    /// Euclidean distance from `p` to the rectangle (zero inside).
    pub fn distance(&self, p: Point) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Material {
    Substrate,
    Vacuum,
    Conductor,
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Material::Substrate => "substrate",
            Material::Vacuum => "vacuum",
            Material::Conductor => "conductor",
        })
    }
}

/// One of the three thin lossy interfaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Interface {
    /// Substrate-metal.
    Sm,
    /// Substrate-air.
    Sa,
    /// Metal-air.
    Ma,
}

impl Interface {
    pub const ALL: [Interface; 3] = [Interface::Sm, Interface::Sa, Interface::Ma];

    pub fn name(self) -> &'static str {
        match self {
            Interface::Sm => "SM",
            Interface::Sa => "SA",
            Interface::Ma => "MA",
        }
    }
}

impl fmt::Display for Interface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tag carried by every boundary segment of a layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InterfaceTag {
    Sm,
    Sa,
    Ma,
    Outer,
}

impl InterfaceTag {
    pub fn interface(self) -> Option<Interface> {
        match self {
            InterfaceTag::Sm => Some(Interface::Sm),
            InterfaceTag::Sa => Some(Interface::Sa),
            InterfaceTag::Ma => Some(Interface::Ma),
            InterfaceTag::Outer => None,
        }
    }
}

impl From<Interface> for InterfaceTag {
    fn from(i: Interface) -> Self {
        match i {
            Interface::Sm => InterfaceTag::Sm,
            Interface::Sa => InterfaceTag::Sa,
            Interface::Ma => InterfaceTag::Ma,
        }
    }
}

/// Three values indexed by [`Interface`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PerInterface<T> {
    pub sm: T,
    pub sa: T,
    pub ma: T,
}

impl<T> PerInterface<T> {
    pub fn splat(v: T) -> Self
    where
        T: Clone,
    {
        PerInterface {
            sm: v.clone(),
            sa: v.clone(),
            ma: v,
        }
    }

    pub fn get(&self, i: Interface) -> &T {
        match i {
            Interface::Sm => &self.sm,
            Interface::Sa => &self.sa,
            Interface::Ma => &self.ma,
        }
    }

    pub fn get_mut(&mut self, i: Interface) -> &mut T {
        match i {
            Interface::Sm => &mut self.sm,
            Interface::Sa => &mut self.sa,
            Interface::Ma => &mut self.ma,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Interface, &T) -> U) -> PerInterface<U> {
        PerInterface {
            sm: f(Interface::Sm, &self.sm),
            sa: f(Interface::Sa, &self.sa),
            ma: f(Interface::Ma, &self.ma),
        }
    }

    pub fn try_map<U>(
        &self,
        mut f: impl FnMut(Interface, &T) -> Result<U>,
    ) -> Result<PerInterface<U>> {
        Ok(PerInterface {
            sm: f(Interface::Sm, &self.sm)?,
            sa: f(Interface::Sa, &self.sa)?,
            ma: f(Interface::Ma, &self.ma)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    /// Closed polygon, counter-clockwise, last vertex not repeated.
    pub polygon: Vec<Point>,
    pub material: Material,
    /// Electrode name for conductors.
    pub electrode: Option<String>,
}

impl Region {
    pub fn signed_area(&self) -> f64 {
        polygon_signed_area(&self.polygon)
    }

    /// Strict interior test (even-odd rule); points on the boundary may go
    /// either way, so callers probe with offset points.
    pub fn contains(&self, p: Point) -> bool {
        polygon_contains(&self.polygon, p)
    }

    pub fn on_boundary(&self, p: Point, tol: f64) -> bool {
        polygon_edges(&self.polygon).any(|(a, b)| point_segment_distance(p, a, b) <= tol)
    }
}

/// Straight boundary piece carrying an interface tag.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
    pub tag: InterfaceTag,
    /// Set on SA pieces forming the vertical walls of a trench.
    pub sidewall: bool,
}

impl Segment {
    pub fn new(a: Point, b: Point, tag: InterfaceTag) -> Self {
        Segment {
            a,
            b,
            tag,
            sidewall: false,
        }
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayoutSpec {
    pub regions: Vec<Region>,
    pub segments: Vec<Segment>,
    pub trench_depth: f64,
    pub bbox: Rect,
}

impl LayoutSpec {
    /// Absolute tolerance for coincidence tests, scaled to the box.
    pub fn tolerance(&self) -> f64 {
        self.bbox.diameter() * 1e-12
    }

    /// Sorted, de-duplicated electrode names.
    pub fn electrodes(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .regions
            .iter()
            .filter_map(|r| r.electrode.clone())
            .collect();
        names.sort();
        names.dedup();
        names
    }

    pub fn conductors(&self) -> impl Iterator<Item = &Region> {
        self.regions
            .iter()
            .filter(|r| r.material == Material::Conductor)
    }

    /// Conductor vertices away from the outer box: the points where the
    /// field is singular.
    pub fn conductor_corners(&self) -> Vec<Point> {
        let tol = self.tolerance();
        let mut out: Vec<Point> = Vec::new();
        for r in self.conductors() {
            for &p in &r.polygon {
                if !self.bbox.on_boundary(p, tol) && !out.iter().any(|q| q.key() == p.key()) {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Segment endpoints away from the outer box.
    pub fn feature_vertices(&self) -> Vec<Point> {
        let tol = self.tolerance();
        let mut out: Vec<Point> = Vec::new();
        for s in &self.segments {
            for p in [s.a, s.b] {
                if !self.bbox.on_boundary(p, tol) && !out.iter().any(|q| q.key() == p.key()) {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Region whose interior contains `p`.
    pub fn region_at(&self, p: Point) -> Option<&Region> {
        self.regions.iter().find(|r| r.contains(p))
    }

    pub fn segment_length(&self, tag: InterfaceTag) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.tag == tag)
            .map(Segment::length)
            .sum()
    }
}

pub(crate) fn polygon_edges(poly: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    (0..poly.len()).map(move |i| (poly[i], poly[(i + 1) % poly.len()]))
}

pub(crate) fn polygon_signed_area(poly: &[Point]) -> f64 {
    0.5 * polygon_edges(poly).map(|(a, b)| a.cross(b)).sum::<f64>()
}

pub(crate) fn polygon_contains(poly: &[Point], p: Point) -> bool {
    let mut inside = false;
    for (a, b) in polygon_edges(poly) {
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

// ---------------------------------------------------------------------------
// Design parameters and presets
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    /// Alternating fingers at +V/2 and -V/2.
    Interdigitated,
    /// Two rectangular pads facing each other across one gap.
    PadPair,
}

impl FromStr for Style {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "interdigitated" | "idc" => Ok(Style::Interdigitated),
            "pad_pair" | "pads" => Ok(Style::PadPair),
            other => Err(Error::invalid(format!("unknown design style `{other}`"))),
        }
    }
}

/// Cross-section parameters of a qubit capacitor. Lengths in metres.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignParams {
    pub style: Style,
    /// Finger linewidth, or pad width measured across the gap.
    pub conductor_width: f64,
    pub gap: f64,
    /// Finger pairs for interdigitated designs; must be 1 for pad pairs.
    pub n_repeats: usize,
    pub metal_thickness: f64,
    /// Pad extent along the gap (out of the cross-section plane).
    pub pad_height: Option<f64>,
    /// Inner span of the grounding box that surrounds the electrodes.
    pub ground_box_span: f64,
}

impl DesignParams {
    pub const DEFAULT_METAL_THICKNESS: f64 = 200e-9;
    pub const DEFAULT_GROUND_BOX_SPAN: f64 = 650e-6;

    pub fn interdigitated(width: f64, gap: f64, finger_pairs: usize) -> Self {
        DesignParams {
            style: Style::Interdigitated,
            conductor_width: width,
            gap,
            n_repeats: finger_pairs,
            metal_thickness: Self::DEFAULT_METAL_THICKNESS,
            pad_height: None,
            ground_box_span: Self::DEFAULT_GROUND_BOX_SPAN,
        }
    }

    pub fn pad_pair(pad_width: f64, gap: f64, pad_height: f64) -> Self {
        DesignParams {
            style: Style::PadPair,
            conductor_width: pad_width,
            gap,
            n_repeats: 1,
            metal_thickness: Self::DEFAULT_METAL_THICKNESS,
            pad_height: Some(pad_height),
            ground_box_span: Self::DEFAULT_GROUND_BOX_SPAN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("conductor_width", self.conductor_width)?;
        positive("gap", self.gap)?;
        positive("metal_thickness", self.metal_thickness)?;
        positive("ground_box_span", self.ground_box_span)?;
        if let Some(h) = self.pad_height {
            positive("pad_height", h)?;
        }
        if self.n_repeats == 0 {
            return Err(Error::invalid("n_repeats must be at least 1"));
        }
        if self.style == Style::PadPair && self.n_repeats != 1 {
            return Err(Error::invalid("pad-pair designs have exactly one repeat"));
        }
        Ok(())
    }

    /// Number of conductors at +V/2 or -V/2.
    pub fn electrode_count(&self) -> usize {
        match self.style {
            Style::Interdigitated => 2 * self.n_repeats,
            Style::PadPair => 2,
        }
    }

    /// Lateral span of the driven electrodes.
    pub fn electrode_extent(&self) -> f64 {
        let n = self.electrode_count() as f64;
        n * self.conductor_width + (n - 1.0) * self.gap
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModId {
    A,
    B,
    C,
    D,
    E,
}

impl ModId {
    pub const ALL: [ModId; 5] = [ModId::A, ModId::B, ModId::C, ModId::D, ModId::E];

    /// Canonical config name, e.g. `mod_c`.
    pub fn name(self) -> &'static str {
        match self {
            ModId::A => "mod_a",
            ModId::B => "mod_b",
            ModId::C => "mod_c",
            ModId::D => "mod_d",
            ModId::E => "mod_e",
        }
    }

    pub fn preset(self) -> ModPreset {
        // Four finger pairs keep every interdigitated array well inside the grounding box.
        let (params, g_mhz) = match self {
            ModId::A => (DesignParams::interdigitated(um(1.0), um(1.0), 4), 8.0),
            ModId::B => (DesignParams::interdigitated(um(5.0), um(5.0), 4), 20.0),
            ModId::C => (DesignParams::interdigitated(um(20.0), um(20.0), 4), 45.0),
            ModId::D => (DesignParams::pad_pair(um(60.0), um(20.0), um(500.0)), 52.0),
            ModId::E => (DesignParams::pad_pair(um(120.0), um(70.0), um(500.0)), 53.0),
        };
        ModPreset {
            id: self,
            params,
            coupling_g: mhz(g_mhz),
        }
    }
}

impl fmt::Display for ModId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        let letter = t.strip_prefix("mod_").unwrap_or(&t);
        match letter {
            "a" => Ok(ModId::A),
            "b" => Ok(ModId::B),
            "c" => Ok(ModId::C),
            "d" => Ok(ModId::D),
            "e" => Ok(ModId::E),
            _ => Err(Error::invalid(format!("unknown design preset `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModPreset {
    pub id: ModId,
    pub params: DesignParams,
    /// Qubit-resonator coupling, Hz.
    pub coupling_g: f64,
}

/// Looks up one of the five reference designs by name (`A`, `mod_a`, ...).
pub fn preset(id: &str) -> Result<ModPreset> {
    Ok(id.parse::<ModId>()?.preset())
}

// ---------------------------------------------------------------------------
// Layout construction
// ---------------------------------------------------------------------------

struct Strip {
    x0: f64,
    x1: f64,
    electrode: &'static str,
}

/// Materialises a design into tagged polygons with the given trench depth.
pub fn build_layout(params: &DesignParams, trench_depth: f64) -> Result<LayoutSpec> {
    params.validate()?;
    if !(trench_depth.is_finite() && trench_depth >= 0.0) {
        return Err(Error::invalid(format!(
            "trench depth must be non-negative, got {trench_depth}"
        )));
    }

    let w = params.conductor_width;
    let g = params.gap;
    let t = params.metal_thickness;
    let half_span = 0.5 * params.ground_box_span;
    let extent = params.electrode_extent();
    if 0.5 * extent >= half_span {
        return Err(Error::ConstructionFailure(format!(
            "electrodes span {:.3} um and overlap the {:.3} um grounding box",
            extent * 1e6,
            params.ground_box_span * 1e6
        )));
    }

    let half_width = 0.5 * BOX_TO_EXTENT * params.ground_box_span;
    let depth = BOX_TO_EXTENT * params.ground_box_span;
    let bbox = Rect::new(Point::new(-half_width, -depth), Point::new(half_width, depth));

    let mut strips = vec![Strip {
        x0: -half_width,
        x1: -half_span,
        electrode: "ground",
    }];
    let n = params.electrode_count();
    let left = -0.5 * extent;
    for k in 0..n {
        let x0 = left + k as f64 * (w + g);
        strips.push(Strip {
            x0,
            x1: x0 + w,
            electrode: if k % 2 == 0 { "plus" } else { "minus" },
        });
    }
    strips.push(Strip {
        x0: half_span,
        x1: half_width,
        electrode: "ground",
    });

    Ok(layout_from_strips(&strips, t, trench_depth, bbox))
}

fn push_distinct(v: &mut Vec<Point>, p: Point) {
    if v.last().map(|q| q.key()) != Some(p.key()) {
        v.push(p);
    }
}

fn layout_from_strips(strips: &[Strip], t: f64, d: f64, bbox: Rect) -> LayoutSpec {
    let (xl, xr) = (bbox.min.x, bbox.max.x);
    let (yb, yt) = (bbox.min.y, bbox.max.y);
    let last = strips.len() - 1;

    let mut regions = Vec::new();
    let mut segments = Vec::new();

    // Substrate surface profile, left to right.
    let mut profile = Vec::new();
    // Vacuum lower boundary, left to right, wrapping over every conductor.
    let mut upper = Vec::new();
    for (i, s) in strips.iter().enumerate() {
        regions.push(Region {
            polygon: vec![
                Point::new(s.x0, 0.0),
                Point::new(s.x1, 0.0),
                Point::new(s.x1, t),
                Point::new(s.x0, t),
            ],
            material: Material::Conductor,
            electrode: Some(s.electrode.to_string()),
        });

        segments.push(Segment::new(
            Point::new(s.x0, 0.0),
            Point::new(s.x1, 0.0),
            InterfaceTag::Sm,
        ));
        let side_tag = |x: f64| {
            if x == xl || x == xr {
                InterfaceTag::Outer
            } else {
                InterfaceTag::Ma
            }
        };
        segments.push(Segment::new(
            Point::new(s.x0, 0.0),
            Point::new(s.x0, t),
            side_tag(s.x0),
        ));
        segments.push(Segment::new(
            Point::new(s.x0, t),
            Point::new(s.x1, t),
            InterfaceTag::Ma,
        ));
        segments.push(Segment::new(
            Point::new(s.x1, 0.0),
            Point::new(s.x1, t),
            side_tag(s.x1),
        ));

        push_distinct(&mut profile, Point::new(s.x0, 0.0));
        push_distinct(&mut profile, Point::new(s.x1, 0.0));

        if i > 0 {
            push_distinct(&mut upper, Point::new(s.x0, 0.0));
        }
        push_distinct(&mut upper, Point::new(s.x0, t));
        push_distinct(&mut upper, Point::new(s.x1, t));
        if i < last {
            push_distinct(&mut upper, Point::new(s.x1, 0.0));
        }

        if i < last {
            let next = &strips[i + 1];
            let floor_a = Point::new(s.x1, -d);
            let floor_b = Point::new(next.x0, -d);
            push_distinct(&mut profile, floor_a);
            push_distinct(&mut profile, floor_b);
            push_distinct(&mut upper, floor_a);
            push_distinct(&mut upper, floor_b);
            segments.push(Segment::new(floor_a, floor_b, InterfaceTag::Sa));
            if d > 0.0 {
                for x in [s.x1, next.x0] {
                    segments.push(Segment {
                        a: Point::new(x, -d),
                        b: Point::new(x, 0.0),
                        tag: InterfaceTag::Sa,
                        sidewall: true,
                    });
                }
            }
        }
    }

    let mut substrate = vec![Point::new(xl, yb), Point::new(xr, yb)];
    for &p in profile.iter().rev() {
        push_distinct(&mut substrate, p);
    }
    regions.push(Region {
        polygon: substrate,
        material: Material::Substrate,
        electrode: None,
    });

    let mut vacuum = vec![Point::new(xl, yt)];
    for &p in &upper {
        push_distinct(&mut vacuum, p);
    }
    push_distinct(&mut vacuum, Point::new(xr, yt));
    regions.push(Region {
        polygon: vacuum,
        material: Material::Vacuum,
        electrode: None,
    });

    // Outer box, split where the metal and the substrate surface meet it.
    let outer = [
        (Point::new(xl, yb), Point::new(xr, yb)),
        (Point::new(xr, yb), Point::new(xr, 0.0)),
        (Point::new(xr, t), Point::new(xr, yt)),
        (Point::new(xr, yt), Point::new(xl, yt)),
        (Point::new(xl, yt), Point::new(xl, t)),
        (Point::new(xl, 0.0), Point::new(xl, yb)),
    ];
    for (a, b) in outer {
        segments.push(Segment::new(a, b, InterfaceTag::Outer));
    }

    LayoutSpec {
        regions,
        segments,
        trench_depth: d,
        bbox,
    }
}

/// Two plates of width `width` enclosing a stack of dielectric layers
/// (listed bottom to top). The side walls are the outer box, so the field
/// between the plates is exactly uniform in every layer.
///
/// Electrodes are named `bottom` and `top`.
pub fn parallel_plate(
    width: f64,
    layers: &[(f64, Material)],
    plate_thickness: f64,
) -> Result<LayoutSpec> {
    if !(width > 0.0 && plate_thickness > 0.0) {
        return Err(Error::invalid("plate width and thickness must be positive"));
    }
    if layers.is_empty() {
        return Err(Error::invalid("at least one dielectric layer is required"));
    }
    for &(h, m) in layers {
        if !(h > 0.0) {
            return Err(Error::invalid("layer thickness must be positive"));
        }
        if m == Material::Conductor {
            return Err(Error::invalid("dielectric layers cannot be conductors"));
        }
    }

    let gap: f64 = layers.iter().map(|l| l.0).sum();
    let bbox = Rect::new(
        Point::new(0.0, -plate_thickness),
        Point::new(width, gap + plate_thickness),
    );
    let rect = |y0: f64, y1: f64| {
        vec![
            Point::new(0.0, y0),
            Point::new(width, y0),
            Point::new(width, y1),
            Point::new(0.0, y1),
        ]
    };
    let plate_tag = |m: Material| match m {
        Material::Substrate => InterfaceTag::Sm,
        _ => InterfaceTag::Ma,
    };

    let mut regions = vec![
        Region {
            polygon: rect(-plate_thickness, 0.0),
            material: Material::Conductor,
            electrode: Some("bottom".into()),
        },
        Region {
            polygon: rect(gap, gap + plate_thickness),
            material: Material::Conductor,
            electrode: Some("top".into()),
        },
    ];
    let mut segments = vec![
        Segment::new(Point::new(0.0, 0.0), Point::new(width, 0.0), plate_tag(layers[0].1)),
        Segment::new(
            Point::new(0.0, gap),
            Point::new(width, gap),
            plate_tag(layers[layers.len() - 1].1),
        ),
    ];
    let mut ys = vec![-plate_thickness, 0.0];
    let mut y = 0.0;
    for (i, &(h, m)) in layers.iter().enumerate() {
        let y1 = if i + 1 == layers.len() { gap } else { y + h };
        regions.push(Region {
            polygon: rect(y, y1),
            material: m,
            electrode: None,
        });
        if i + 1 < layers.len() {
            let next = layers[i + 1].1;
            if next != m {
                segments.push(Segment::new(
                    Point::new(0.0, y1),
                    Point::new(width, y1),
                    InterfaceTag::Sa,
                ));
            }
        }
        ys.push(y1);
        y = y1;
    }
    ys.push(gap + plate_thickness);

    segments.push(Segment::new(
        Point::new(0.0, -plate_thickness),
        Point::new(width, -plate_thickness),
        InterfaceTag::Outer,
    ));
    segments.push(Segment::new(
        Point::new(width, gap + plate_thickness),
        Point::new(0.0, gap + plate_thickness),
        InterfaceTag::Outer,
    ));
    for pair in ys.windows(2) {
        segments.push(Segment::new(
            Point::new(width, pair[0]),
            Point::new(width, pair[1]),
            InterfaceTag::Outer,
        ));
        segments.push(Segment::new(
            Point::new(0.0, pair[1]),
            Point::new(0.0, pair[0]),
            InterfaceTag::Outer,
        ));
    }

    let layout = LayoutSpec {
        regions,
        segments,
        trench_depth: 0.0,
        bbox,
    };
    let report = validate(&layout);
    if !report.is_valid() {
        return Err(Error::ConstructionFailure(report.to_string()));
    }
    Ok(layout)
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DegenerateRegion { region: usize },
    RegionOutsideBox { region: usize },
    Overlap { first: usize, second: usize },
    /// Regions fail to cover the box by this much area.
    Uncovered { area: f64 },
    MissingTag { a: Point, b: Point, expected: InterfaceTag },
    DoubleTag { a: Point, b: Point, tags: Vec<InterfaceTag> },
    WrongTag { a: Point, b: Point, expected: InterfaceTag, found: InterfaceTag },
    DanglingSegment { segment: usize },
    NegativeTrench,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pt = |p: &Point| format!("({:.6e}, {:.6e})", p.x, p.y);
        match self {
            Violation::DegenerateRegion { region } => write!(f, "region {region} is degenerate"),
            Violation::RegionOutsideBox { region } => {
                write!(f, "region {region} extends outside the bounding box")
            }
            Violation::Overlap { first, second } => {
                write!(f, "regions {first} and {second} overlap")
            }
            Violation::Uncovered { area } => {
                write!(f, "regions leave {area:.3e} m^2 of the box uncovered")
            }
            Violation::MissingTag { a, b, expected } => {
                write!(f, "edge {}-{} has no tag (expected {expected:?})", pt(a), pt(b))
            }
            Violation::DoubleTag { a, b, tags } => {
                write!(f, "edge {}-{} carries several tags {tags:?}", pt(a), pt(b))
            }
            Violation::WrongTag { a, b, expected, found } => write!(
                f,
                "edge {}-{} tagged {found:?}, expected {expected:?}",
                pt(a),
                pt(b)
            ),
            Violation::DanglingSegment { segment } => {
                write!(f, "segment {segment} does not lie on a region boundary")
            }
            Violation::NegativeTrench => write!(f, "trench depth is negative"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

type EdgeKey = ((i64, i64), (i64, i64));

fn edge_key(a: Point, b: Point) -> EdgeKey {
    let (ka, kb) = (a.key(), b.key());
    if ka <= kb {
        (ka, kb)
    } else {
        (kb, ka)
    }
}

/// Splits `a`-`b` at every vertex lying strictly inside it.
pub(crate) fn split_at_vertices(a: Point, b: Point, vertices: &[Point], tol: f64) -> Vec<(Point, Point)> {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    let mut cuts: Vec<(f64, Point)> = vertices
        .iter()
        .filter_map(|&v| {
            let t = v.sub(a).dot(ab) / len2;
            let inside = t > 0.0 && t < 1.0;
            (inside && point_segment_distance(v, a, b) <= tol && v.key() != a.key() && v.key() != b.key())
                .then_some((t, v))
        })
        .collect();
    cuts.sort_by(|x, y| x.0.total_cmp(&y.0));
    cuts.dedup_by_key(|c| c.1.key());
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut prev = a;
    for (_, v) in cuts {
        out.push((prev, v));
        prev = v;
    }
    out.push((prev, b));
    out
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = b.sub(a).cross(c.sub(a));
    let o2 = b.sub(a).cross(d.sub(a));
    let o3 = d.sub(c).cross(a.sub(c));
    let o4 = d.sub(c).cross(b.sub(c));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Checks every layout invariant and lists the violations found.
pub fn validate(layout: &LayoutSpec) -> ValidationReport {
    let mut violations = Vec::new();
    let tol = layout.tolerance();
    let bbox = layout.bbox;

    if !(layout.trench_depth >= 0.0) {
        violations.push(Violation::NegativeTrench);
    }

    let mut vertices: Vec<Point> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for p in layout
        .regions
        .iter()
        .flat_map(|r| r.polygon.iter().copied())
        .chain(layout.segments.iter().flat_map(|s| [s.a, s.b]))
    {
        if seen.insert(p.key()) {
            vertices.push(p);
        }
    }

    let mut area_sum = 0.0;
    for (i, r) in layout.regions.iter().enumerate() {
        let area = r.signed_area().abs();
        if r.polygon.len() < 3 || area <= bbox.area() * 1e-24 {
            violations.push(Violation::DegenerateRegion { region: i });
            continue;
        }
        if r.polygon.iter().any(|&p| !bbox.contains(p, tol)) {
            violations.push(Violation::RegionOutsideBox { region: i });
        }
        area_sum += area;
    }

    // Pairwise overlap: crossing edges, or a point just inside one region's
    // edge lying strictly inside the other.
    for i in 0..layout.regions.len() {
        for j in (i + 1)..layout.regions.len() {
            let (ri, rj) = (&layout.regions[i], &layout.regions[j]);
            if overlaps(ri, rj) || overlaps(rj, ri) {
                violations.push(Violation::Overlap { first: i, second: j });
            }
        }
    }
    let deficit = bbox.area() - area_sum;
    if deficit > bbox.area() * 1e-9 {
        violations.push(Violation::Uncovered { area: deficit });
    }

    // Segment coverage, keyed by elementary edge.
    let mut tags: BTreeMap<EdgeKey, Vec<InterfaceTag>> = BTreeMap::new();
    for s in &layout.segments {
        for (a, b) in split_at_vertices(s.a, s.b, &vertices, tol) {
            tags.entry(edge_key(a, b)).or_default().push(s.tag);
        }
    }

    let mut boundary_edges: BTreeMap<EdgeKey, ()> = BTreeMap::new();
    for r in &layout.regions {
        let sign = if r.signed_area() >= 0.0 { 1.0 } else { -1.0 };
        for (pa, pb) in polygon_edges(&r.polygon) {
            for (a, b) in split_at_vertices(pa, pb, &vertices, tol) {
                let key = edge_key(a, b);
                boundary_edges.insert(key, ());
                let dir = b.sub(a);
                let len = dir.norm();
                if len == 0.0 {
                    continue;
                }
                // Outward normal of a counter-clockwise polygon is the right normal.
                let outward = Point::new(dir.y, -dir.x).scale(sign / len);
                let probe = a.midpoint(b).add(outward.scale(len.min(bbox.diameter()) * 1e-6));
                let expected = if !bbox.contains(probe, 0.0) {
                    Some(InterfaceTag::Outer)
                } else {
                    let other = layout.region_at(probe).map(|o| o.material);
                    match (r.material, other) {
                        (Material::Conductor, Some(Material::Substrate)) => Some(InterfaceTag::Sm),
                        (Material::Conductor, Some(Material::Vacuum)) => Some(InterfaceTag::Ma),
                        (Material::Substrate, Some(Material::Vacuum)) => Some(InterfaceTag::Sa),
                        _ => None,
                    }
                };
                let Some(expected) = expected else { continue };
                match tags.get(&key).map(Vec::as_slice) {
                    None | Some([]) => violations.push(Violation::MissingTag { a, b, expected }),
                    Some([found]) if *found != expected => violations.push(Violation::WrongTag {
                        a,
                        b,
                        expected,
                        found: *found,
                    }),
                    Some([_]) => {}
                    Some(many) => {
                        let v = Violation::DoubleTag {
                            a,
                            b,
                            tags: many.to_vec(),
                        };
                        if !violations.contains(&v) {
                            violations.push(v);
                        }
                    }
                }
            }
        }
    }

    for (i, s) in layout.segments.iter().enumerate() {
        let pieces = split_at_vertices(s.a, s.b, &vertices, tol);
        if pieces
            .iter()
            .any(|&(a, b)| !boundary_edges.contains_key(&edge_key(a, b)))
        {
            violations.push(Violation::DanglingSegment { segment: i });
        }
    }

    ValidationReport { violations }
}

fn overlaps(r: &Region, other: &Region) -> bool {
    for (a, b) in polygon_edges(&r.polygon) {
        for (c, d) in polygon_edges(&other.polygon) {
            if segments_cross(a, b, c, d) {
                return true;
            }
        }
    }
    let sign = if r.signed_area() >= 0.0 { 1.0 } else { -1.0 };
    polygon_edges(&r.polygon).any(|(a, b)| {
        let dir = b.sub(a);
        let len = dir.norm();
        if len == 0.0 {
            return false;
        }
        let inward = Point::new(-dir.y, dir.x).scale(sign / len);
        let probe = a.midpoint(b).add(inward.scale(len * 1e-6));
        other.contains(probe)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::nm;

    #[test]
    fn presets_match_reference_dimensions() {
        let a = preset("A").unwrap();
        assert_eq!(a.params.conductor_width, um(1.0));
        assert_eq!(a.params.gap, um(1.0));
        let e = preset("mod_e").unwrap();
        assert_eq!(e.params.style, Style::PadPair);
        assert_eq!(e.params.conductor_width, um(120.0));
        assert_eq!(e.params.pad_height, Some(um(500.0)));
        assert_eq!(e.params.gap, um(70.0));
        assert_eq!(preset("D").unwrap().coupling_g, mhz(52.0));
        assert_eq!(preset("b").unwrap().coupling_g, mhz(20.0));
        assert_eq!(preset("c").unwrap().params.metal_thickness, DesignParams::DEFAULT_METAL_THICKNESS);
        assert_eq!(preset("c").unwrap().params.ground_box_span, um(650.0));
    }

    #[test]
    fn unknown_preset_is_invalid_argument() {
        assert!(matches!(preset("F"), Err(Error::InvalidArgument(_))));
        assert!(matches!(preset(""), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_width_is_rejected() {
        let mut p = ModId::C.preset().params;
        p.conductor_width = 0.0;
        assert!(matches!(build_layout(&p, 0.0), Err(Error::InvalidArgument(_))));
        let p = ModId::C.preset().params;
        assert!(matches!(build_layout(&p, -1e-9), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn electrodes_overlapping_ground_fail_construction() {
        let mut p = ModId::C.preset().params;
        p.ground_box_span = um(100.0);
        assert!(matches!(build_layout(&p, 0.0), Err(Error::ConstructionFailure(_))));
    }

    #[test]
    fn flat_surface_at_zero_trench() {
        let layout = build_layout(&ModId::C.preset().params, 0.0).unwrap();
        assert!(validate(&layout).is_valid(), "{}", validate(&layout));
        let sa: Vec<_> = layout
            .segments
            .iter()
            .filter(|s| s.tag == InterfaceTag::Sa)
            .collect();
        assert!(!sa.is_empty());
        assert!(sa.iter().all(|s| s.a.y == 0.0 && s.b.y == 0.0 && !s.sidewall));
    }

    #[test]
    fn trench_adds_floor_and_two_sidewalls_per_gap() {
        let d = nm(500.0);
        let p = ModId::C.preset().params;
        let layout = build_layout(&p, d).unwrap();
        assert!(validate(&layout).is_valid(), "{}", validate(&layout));
        // Gaps: between the 8 fingers plus one on each side to ground.
        let gaps = p.electrode_count() + 1;
        let floors: Vec<_> = layout
            .segments
            .iter()
            .filter(|s| s.tag == InterfaceTag::Sa && !s.sidewall)
            .collect();
        let walls: Vec<_> = layout
            .segments
            .iter()
            .filter(|s| s.tag == InterfaceTag::Sa && s.sidewall)
            .collect();
        assert_eq!(floors.len(), gaps);
        assert_eq!(walls.len(), 2 * gaps);
        assert!(floors.iter().all(|s| s.a.y == -d && s.b.y == -d));
        for wall in &walls {
            assert_eq!(wall.a.x, wall.b.x);
            assert_eq!((wall.a.y, wall.b.y), (-d, 0.0));
        }
        // Interior gap between the first two fingers.
        let x1 = -0.5 * p.electrode_extent() + p.conductor_width;
        let x2 = x1 + p.gap;
        assert!(floors
            .iter()
            .any(|s| (s.a.x - x1).abs() < 1e-15 && (s.b.x - x2).abs() < 1e-15));
    }

    #[test]
    fn box_is_ten_times_the_electrode_extent() {
        let p = ModId::E.preset().params;
        let layout = build_layout(&p, 0.0).unwrap();
        assert!(layout.bbox.width() >= 10.0 * p.ground_box_span);
        assert!(-layout.bbox.min.y >= 10.0 * p.ground_box_span);
        assert!(layout.bbox.max.y >= 10.0 * p.ground_box_span);
    }

    #[test]
    fn every_preset_is_valid_with_and_without_trench() {
        for id in ModId::ALL {
            for d in [0.0, nm(50.0), nm(1000.0)] {
                let layout = build_layout(&id.preset().params, d).unwrap();
                let report = validate(&layout);
                assert!(report.is_valid(), "{id} at {d}: {report}");
            }
        }
    }

    #[test]
    fn overlapping_regions_are_reported() {
        let mut layout = build_layout(&ModId::A.preset().params, 0.0).unwrap();
        let extra = layout.regions[1].clone();
        layout.regions.push(extra);
        let report = validate(&layout);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Overlap { .. })));
    }

    #[test]
    fn missing_conductor_tag_is_reported() {
        let mut layout = build_layout(&ModId::A.preset().params, nm(100.0)).unwrap();
        let idx = layout
            .segments
            .iter()
            .position(|s| s.tag == InterfaceTag::Sm && s.a.x > -1e-5 && s.a.x < 0.0)
            .unwrap();
        let removed = layout.segments.remove(idx);
        let report = validate(&layout);
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::MissingTag { a, b, expected: InterfaceTag::Sm }
                if edge_key(*a, *b) == edge_key(removed.a, removed.b)
        )));
    }

    #[test]
    fn wrongly_tagged_edge_is_reported() {
        let mut layout = build_layout(&ModId::B.preset().params, 0.0).unwrap();
        let seg = layout
            .segments
            .iter_mut()
            .find(|s| s.tag == InterfaceTag::Ma)
            .unwrap();
        seg.tag = InterfaceTag::Sa;
        let report = validate(&layout);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::WrongTag { expected: InterfaceTag::Ma, .. })));
    }

    #[test]
    fn doubled_tag_is_reported() {
        let mut layout = build_layout(&ModId::B.preset().params, 0.0).unwrap();
        let dup = layout
            .segments
            .iter()
            .find(|s| s.tag == InterfaceTag::Sm)
            .unwrap()
            .clone();
        layout.segments.push(dup);
        let report = validate(&layout);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::DoubleTag { .. })));
    }

    #[test]
    fn parallel_plate_fixture_is_valid() {
        let l = parallel_plate(
            um(10.0),
            &[(um(5.0), Material::Substrate), (um(5.0), Material::Vacuum)],
            um(1.0),
        )
        .unwrap();
        assert!(validate(&l).is_valid());
        assert_eq!(l.segment_length(InterfaceTag::Sa), um(10.0));
        assert_eq!(l.electrodes(), vec!["bottom".to_string(), "top".to_string()]);
    }
}
