use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ArticulatedModel, Body, Joint, ModelError};
use crate::dynamics::JointLimits;
use crate::geometry::{ConvexPolyhedron, RigidPose, UnitQuaternion, Vec3};

pub const MODEL_SCHEMA: &str = "phystrack.model/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    schema: String,
    name: String,
    bodies: Vec<BodyDoc>,
    joints: Vec<JointDoc>,
    #[serde(default)]
    disabled_pairs: Vec<[String; 2]>,
    tags: BTreeMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseDoc {
    translation: [f64; 3],
    /// w, x, y, z
    rotation: [f64; 4],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BodyDoc {
    name: String,
    mass: f64,
    rest_pose: PoseDoc,
    vertices: Vec<[f64; 3]>,
    faces: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    parent: String,
    child: String,
    parent_anchor: [f64; 3],
    child_anchor: [f64; 3],
    /// w, x, y, z
    parent_frame: [f64; 4],
    /// Radians, `[min, max]` per axis.
    limits: JointLimits,
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn quat(a: [f64; 4]) -> UnitQuaternion {
    UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(a[0], a[1], a[2], a[3]))
}

fn quat_doc(q: &UnitQuaternion) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

fn check_quat(a: [f64; 4], what: &str) -> Result<UnitQuaternion, ModelError> {
    let n = a.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
        return Err(ModelError::Parse(format!("{what} is not a unit quaternion")));
    }
    Ok(quat(a))
}

/// Parses and validates a model document.
pub fn load_model(text: &str) -> Result<ArticulatedModel, ModelError> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    if doc.schema != MODEL_SCHEMA {
        return Err(ModelError::Schema(doc.schema));
    }
    let mut bodies = Vec::with_capacity(doc.bodies.len());
    for b in doc.bodies {
        if bodies.iter().any(|x: &Body| x.name == b.name) {
            return Err(ModelError::Parse(format!("duplicate body name {:?}", b.name)));
        }
        let shape = ConvexPolyhedron::from_faces(b.vertices.into_iter().map(v3).collect(), b.faces)
            .map_err(|e| ModelError::InvalidHull { body: b.name.clone(), source: e })?;
        let rot = check_quat(b.rest_pose.rotation, "rest rotation")?;
        bodies.push(Body {
            name: b.name,
            shape: Arc::new(shape),
            mass: b.mass,
            rest_pose: RigidPose::from_parts(v3(b.rest_pose.translation).into(), rot),
        });
    }
    let index = |name: &str| {
        bodies.iter().position(|b| b.name == name).ok_or_else(|| ModelError::UnknownBody(name.to_string()))
    };
    let mut joints = Vec::with_capacity(doc.joints.len());
    for j in doc.joints {
        joints.push(Joint {
            parent: index(&j.parent)?,
            child: index(&j.child)?,
            parent_anchor: v3(j.parent_anchor),
            child_anchor: v3(j.child_anchor),
            parent_frame: check_quat(j.parent_frame, "joint frame")?,
            limits: j.limits,
        });
    }
    let disabled_pairs = doc
        .disabled_pairs
        .iter()
        .map(|[a, b]| Ok((index(a)?, index(b)?)))
        .collect::<Result<Vec<_>, ModelError>>()?;
    let mut tags = BTreeMap::new();
    for (k, names) in doc.tags {
        let ids = names.iter().map(|n| index(n)).collect::<Result<Vec<_>, _>>()?;
        tags.insert(k, ids);
    }
    let model = ArticulatedModel { name: doc.name, bodies, joints, disabled_pairs, tags };
    model.validate()?;
    Ok(model)
}

/// Writes a model document that [`load_model`] reads back exactly.
pub fn serialize_model(model: &ArticulatedModel) -> String {
    let name = |i: usize| model.bodies[i].name.clone();
    let doc = ModelDoc {
        schema: MODEL_SCHEMA.to_string(),
        name: model.name.clone(),
        bodies: model
            .bodies
            .iter()
            .map(|b| BodyDoc {
                name: b.name.clone(),
                mass: b.mass,
                rest_pose: PoseDoc {
                    translation: b.rest_pose.translation.vector.into(),
                    rotation: quat_doc(&b.rest_pose.rotation),
                },
                vertices: b.shape.vertices().iter().map(|v| [v.x, v.y, v.z]).collect(),
                faces: b.shape.face_rings(),
            })
            .collect(),
        joints: model
            .joints
            .iter()
            .map(|j| JointDoc {
                parent: name(j.parent),
                child: name(j.child),
                parent_anchor: j.parent_anchor.into(),
                child_anchor: j.child_anchor.into(),
                parent_frame: quat_doc(&j.parent_frame),
                limits: j.limits,
            })
            .collect(),
        disabled_pairs: model.disabled_pairs.iter().map(|&(a, b)| [name(a), name(b)]).collect(),
        tags: model.tags.iter().map(|(k, v)| (k.clone(), v.iter().map(|&i| name(i)).collect())).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("model documents always serialize")
}
