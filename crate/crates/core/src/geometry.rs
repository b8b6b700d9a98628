//! Scene representation, box geometry and the cylindrical coordinate frame a
//! relation is expressed in.
//!
//! World axes are fixed: `x` points right, `y` points away from the viewer
//! (behind) and `z` points up. Object positions are box centers.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Lower bound for both frame scales, in meters.
pub const MIN_FRAME_SCALE: f64 = 0.01;

const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("reference set is empty")]
    EmptyReferenceSet,
    #[error("object `{0}` appears more than once")]
    DuplicateObject(String),
    #[error("object `{id}` has non-positive extents {extents:?}")]
    InvalidExtents { id: String, extents: [f64; 3] },
    #[error("invalid workspace: {0}")]
    InvalidWorkspace(String),
    #[error("orientation quaternion has norm {0}, expected 1")]
    InvalidOrientation(f64),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed json in {path}: {message}")]
    Json { path: String, message: String },
}

/// A rigid object approximated by a box of full `extents` (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectModel {
    pub id: String,
    pub name: String,
    #[serde(rename = "extents_m")]
    pub extents: [f64; 3],
}

impl ObjectModel {
    pub fn new(id: impl Into<String>, name: impl Into<String>, extents: [f64; 3]) -> Result<Self, GeometryError> {
        let id = id.into();
        if extents.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(GeometryError::InvalidExtents { id, extents });
        }
        Ok(Self { id, name: name.into(), extents })
    }

    pub fn half_extents(&self) -> Vec3 {
        Vec3::from(self.extents) * 0.5
    }
}

/// Object models keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObjectCatalog {
    objects: BTreeMap<String, ObjectModel>,
}

impl ObjectCatalog {
    pub fn new(models: impl IntoIterator<Item = ObjectModel>) -> Result<Self, GeometryError> {
        let mut objects = BTreeMap::new();
        for model in models {
            let model = ObjectModel::new(model.id, model.name, model.extents)?;
            if objects.contains_key(&model.id) {
                return Err(GeometryError::DuplicateObject(model.id));
            }
            objects.insert(model.id.clone(), model);
        }
        Ok(Self { objects })
    }

    pub fn get(&self, id: &str) -> Result<&ObjectModel, GeometryError> {
        self.objects.get(id).ok_or_else(|| GeometryError::UnknownObject(id.to_owned()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.objects.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ObjectModel> {
        self.objects.values()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Reads an `objects.json` array of `{id, name, extents_m}`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let models: Vec<ObjectModel> = read_json(path.as_ref())?;
        Self::new(models)
    }

    pub fn to_json(&self) -> String {
        let models: Vec<&ObjectModel> = self.objects.values().collect();
        serde_json::to_string_pretty(&models).expect("catalog serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn at(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vec3::new(x, y, z), UnitQuaternion::identity())
    }

    pub fn with_yaw(mut self, yaw: f64) -> Self {
        self.orientation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);
        self
    }

    /// Rotation about the gravity axis.
    pub fn yaw(&self) -> f64 {
        self.orientation.euler_angles().2
    }

    /// Builds a pose from a `[w, x, y, z]` quaternion, which must be unit
    /// length up to a small tolerance. Quaternions already unit length to
    /// rounding are kept as given so that saved poses load unchanged.
    pub fn from_wxyz(position: [f64; 3], wxyz: [f64; 4]) -> Result<Self, GeometryError> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(GeometryError::InvalidOrientation(norm));
        }
        let orientation = if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        Ok(Self::new(Vec3::from(position), orientation))
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }
}

/// Object poses at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneFile", into = "SceneFile")]
pub struct Scene {
    pub timestamp: f64,
    instances: BTreeMap<String, Pose>,
}

impl Scene {
    pub fn new(timestamp: f64) -> Self {
        Self { timestamp, instances: BTreeMap::new() }
    }

    pub fn with(mut self, id: impl Into<String>, pose: Pose) -> Self {
        self.instances.insert(id.into(), pose);
        self
    }

    pub fn insert(&mut self, id: impl Into<String>, pose: Pose) -> Option<Pose> {
        self.instances.insert(id.into(), pose)
    }

    pub fn remove(&mut self, id: &str) -> Option<Pose> {
        self.instances.remove(id)
    }

    pub fn pose(&self, id: &str) -> Result<&Pose, GeometryError> {
        self.instances.get(id).ok_or_else(|| GeometryError::UnknownObject(id.to_owned()))
    }

    pub fn pose_mut(&mut self, id: &str) -> Result<&mut Pose, GeometryError> {
        self.instances.get_mut(id).ok_or_else(|| GeometryError::UnknownObject(id.to_owned()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.instances.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Pose)> {
        self.instances.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.instances.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// World AABB of one instance.
    pub fn aabb(&self, catalog: &ObjectCatalog, id: &str) -> Result<Aabb, GeometryError> {
        Ok(world_aabb(catalog.get(id)?, self.pose(id)?))
    }

    pub fn translated(&self, offset: &Vec3) -> Self {
        let mut out = self.clone();
        for pose in out.instances.values_mut() {
            pose.position += offset;
        }
        out
    }

    /// Every id must resolve in `catalog`.
    pub fn validate(&self, catalog: &ObjectCatalog) -> Result<(), GeometryError> {
        for id in self.instances.keys() {
            catalog.get(id)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        read_json(path.as_ref())
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    id: String,
    position_m: [f64; 3],
    orientation_wxyz: [f64; 4],
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    timestamp: f64,
    instances: Vec<InstanceFile>,
}

impl TryFrom<SceneFile> for Scene {
    type Error = GeometryError;

    fn try_from(file: SceneFile) -> Result<Self, Self::Error> {
        let mut scene = Scene::new(file.timestamp);
        for inst in file.instances {
            let pose = Pose::from_wxyz(inst.position_m, inst.orientation_wxyz)?;
            if scene.insert(inst.id.clone(), pose).is_some() {
                return Err(GeometryError::DuplicateObject(inst.id));
            }
        }
        Ok(scene)
    }
}

impl From<Scene> for SceneFile {
    fn from(scene: Scene) -> Self {
        SceneFile {
            timestamp: scene.timestamp,
            instances: scene
                .instances
                .iter()
                .map(|(id, pose)| InstanceFile {
                    id: id.clone(),
                    position_m: pose.position.into(),
                    orientation_wxyz: pose.wxyz(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        debug_assert!(min.iter().zip(max.iter()).all(|(a, b)| a <= b), "min <= max");
        Self { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let (min, max) = iter.fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        Some(Self { min, max })
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&other.min), max: self.max.sup(&other.max) }
    }

    pub fn extents(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains_point(&self, p: &Vec3) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        self.min.x <= x && x <= self.max.x && self.min.y <= y && y <= self.max.y
    }

    /// True if `other` lies inside `self` in the horizontal plane.
    pub fn contains_footprint(&self, other: &Aabb) -> bool {
        self.min.x <= other.min.x && other.max.x <= self.max.x && self.min.y <= other.min.y && other.max.y <= self.max.y
    }

    pub fn translated(&self, offset: &Vec3) -> Aabb {
        Aabb { min: self.min + offset, max: self.max + offset }
    }
}

/// The 8 corners of an oriented box.
pub fn box_corners(model: &ObjectModel, pose: &Pose) -> [Vec3; 8] {
    let half = model.half_extents();
    let mut corners = [Vec3::zeros(); 8];
    for (i, corner) in corners.iter_mut().enumerate() {
        let local = Vec3::new(
            if i & 1 == 0 { -half.x } else { half.x },
            if i & 2 == 0 { -half.y } else { half.y },
            if i & 4 == 0 { -half.z } else { half.z },
        );
        *corner = pose.position + pose.orientation * local;
    }
    corners
}

/// Axis-aligned box enclosing the oriented box of `model` at `pose`.
pub fn world_aabb(model: &ObjectModel, pose: &Pose) -> Aabb {
    Aabb::from_points(box_corners(model, pose).iter()).expect("eight corners")
}

/// Cylindrical coordinate system anchored at a set of reference objects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationFrame {
    pub origin: Vec3,
    pub horizontal_scale: f64,
    pub vertical_scale: f64,
}

/// Normalized cylindrical coordinates relative to a [`RelationFrame`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylCoords {
    pub r: f64,
    pub phi: f64,
    pub h: f64,
}

impl CylCoords {
    pub fn new(r: f64, phi: f64, h: f64) -> Self {
        Self { r, phi, h }
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(phi: f64) -> f64 {
    if (-PI..PI).contains(&phi) {
        phi
    } else {
        (phi + PI).rem_euclid(2.0 * PI) - PI
    }
}

/// Frame centered at the bottom-projected centroid of the union AABB of the
/// reference objects, scaled by that box's size.
pub fn build_relation_frame<S: AsRef<str>>(
    scene: &Scene,
    catalog: &ObjectCatalog,
    references: &[S],
) -> Result<RelationFrame, GeometryError> {
    let mut union: Option<Aabb> = None;
    for id in references {
        let aabb = scene.aabb(catalog, id.as_ref())?;
        union = Some(match union {
            Some(u) => u.union(&aabb),
            None => aabb,
        });
    }
    let union = union.ok_or(GeometryError::EmptyReferenceSet)?;
    let center = union.center();
    let ext = union.extents();
    Ok(RelationFrame {
        origin: Vec3::new(center.x, center.y, union.min.z),
        horizontal_scale: (0.5 * ext.x.hypot(ext.y)).max(MIN_FRAME_SCALE),
        vertical_scale: ext.z.max(MIN_FRAME_SCALE),
    })
}

impl RelationFrame {
    pub fn to_cylindrical(&self, world: &Vec3) -> CylCoords {
        let d = world - self.origin;
        let rho = d.x.hypot(d.y);
        let phi = if rho == 0.0 { 0.0 } else { d.y.atan2(d.x) };
        CylCoords { r: rho / self.horizontal_scale, phi, h: d.z / self.vertical_scale }
    }

    pub fn from_cylindrical(&self, c: &CylCoords) -> Vec3 {
        let rho = c.r * self.horizontal_scale;
        let (sin, cos) = c.phi.sin_cos();
        self.origin + Vec3::new(rho * cos, rho * sin, c.h * self.vertical_scale)
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, GeometryError> {
    let text = fs::read_to_string(path)
        .map_err(|e| GeometryError::Io { path: path.display().to_string(), message: e.to_string() })?;
    serde_json::from_str(&text)
        .map_err(|e| GeometryError::Json { path: path.display().to_string(), message: e.to_string() })
}
