//! Bundled hand layouts.
//!
//! Both hands are radial claws: `n` fingers spaced evenly around the +z
//! (approach) axis on top of a box palm, each finger a knuckle +
//! proximal/medial/distal capsule chain. The five-finger hand has 15 DOF
//! and 20 joints (per finger: spread + two flexions independent, distal
//! flexion coupled 1:1 to the middle flexion). The four-finger hand has 16
//! fully independent DOF (4 per finger).

use std::f64::consts::PI;

use super::config::{
    DriveConfig, FingerConfig, GeometryConfig, HandConfig, JointConfig, LinkConfig,
    TransformConfig,
};

const BASE_RADIUS: f64 = 0.055;
const PALM_TOP: f64 = 0.06;
const KNUCKLE_LEN: f64 = 0.015;
const PROXIMAL_LEN: f64 = 0.04;
const MEDIAL_LEN: f64 = 0.025;
const DISTAL_LEN: f64 = 0.02;
const FINGER_RADIUS: f64 = 0.008;

const SPREAD_LIMITS: [f64; 2] = [-0.35, 0.35];
const MCP_LIMITS: [f64; 2] = [-0.4, 0.6];
const CURL_LIMITS: [f64; 2] = [0.0, 0.6];

fn translation(t: [f64; 3]) -> TransformConfig {
    TransformConfig {
        translation: t,
        rpy: [0.0, 0.0, 0.0],
    }
}

struct FingerDofs {
    spread: usize,
    mcp: usize,
    pip: usize,
    /// Independent distal DOF, or `None` when coupled to `pip`.
    dip: Option<usize>,
}

fn build_claw(name: &str, finger_count: usize, dofs_of: impl Fn(usize) -> FingerDofs) -> HandConfig {
    let mut links = vec![LinkConfig {
        name: "palm".into(),
        parent: None,
        origin: None,
        geometry: GeometryConfig::Box {
            half_extents: [0.05, 0.05, 0.03],
            offset: [0.0, 0.0, 0.03],
        },
        surface_samples: 256,
    }];
    let mut joints = Vec::new();
    let mut fingers = Vec::new();

    for i in 0..finger_count {
        let f = format!("f{i}");
        let alpha = 2.0 * PI * i as f64 / finger_count as f64;
        let dofs = dofs_of(i);

        let chain = [
            (format!("{f}_knuckle"), FINGER_RADIUS, KNUCKLE_LEN),
            (format!("{f}_proximal"), FINGER_RADIUS, PROXIMAL_LEN),
            (format!("{f}_medial"), 0.0075, MEDIAL_LEN),
            (format!("{f}_distal"), 0.007, DISTAL_LEN),
        ];
        for (lname, radius, length) in &chain {
            links.push(LinkConfig {
                name: lname.clone(),
                parent: None, // set through the joint below
                origin: None,
                geometry: GeometryConfig::Capsule {
                    radius: *radius,
                    length: *length,
                },
                surface_samples: 64,
            });
        }

        // Finger base frame: on the palm rim, local +x pointing inward.
        joints.push(JointConfig {
            name: format!("{f}_spread"),
            parent: "palm".into(),
            child: chain[0].0.clone(),
            origin: TransformConfig {
                translation: [
                    BASE_RADIUS * alpha.cos(),
                    BASE_RADIUS * alpha.sin(),
                    PALM_TOP,
                ],
                rpy: [0.0, 0.0, alpha + PI],
            },
            axis: [1.0, 0.0, 0.0],
            limits: SPREAD_LIMITS,
            drive: DriveConfig::Independent { dof: dofs.spread },
        });
        joints.push(JointConfig {
            name: format!("{f}_mcp"),
            parent: chain[0].0.clone(),
            child: chain[1].0.clone(),
            origin: translation([0.0, 0.0, KNUCKLE_LEN]),
            axis: [0.0, 1.0, 0.0],
            limits: MCP_LIMITS,
            drive: DriveConfig::Independent { dof: dofs.mcp },
        });
        joints.push(JointConfig {
            name: format!("{f}_pip"),
            parent: chain[1].0.clone(),
            child: chain[2].0.clone(),
            origin: translation([0.0, 0.0, PROXIMAL_LEN]),
            axis: [0.0, 1.0, 0.0],
            limits: CURL_LIMITS,
            drive: DriveConfig::Independent { dof: dofs.pip },
        });
        joints.push(JointConfig {
            name: format!("{f}_dip"),
            parent: chain[2].0.clone(),
            child: chain[3].0.clone(),
            origin: translation([0.0, 0.0, MEDIAL_LEN]),
            axis: [0.0, 1.0, 0.0],
            limits: CURL_LIMITS,
            drive: match dofs.dip {
                Some(dof) => DriveConfig::Independent { dof },
                None => DriveConfig::Coupled {
                    dof: dofs.pip,
                    coefficient: 1.0,
                },
            },
        });

        fingers.push(FingerConfig {
            name: f.clone(),
            links: chain.iter().map(|(n, _, _)| n.clone()).collect(),
            fingertip_link: chain[3].0.clone(),
            fingertip_point: [0.0, 0.0, DISTAL_LEN + 0.007],
        });
    }

    HandConfig {
        name: name.into(),
        dof_count: joints
            .iter()
            .map(|j| match j.drive {
                DriveConfig::Independent { dof } => dof + 1,
                DriveConfig::Coupled { .. } => 0,
            })
            .max()
            .unwrap_or(0),
        links,
        joints,
        fingers,
        open_pose: None, // filled in by the callers below
    }
}

/// Five fingers, 15 DOF, 20 joints: each finger drives spread + two
/// flexions, with the distal flexion coupled 1:1 to the middle one.
pub fn five_finger_config() -> HandConfig {
    let mut cfg = build_claw("graspforge_five_finger", 5, |i| FingerDofs {
        spread: 3 * i,
        mcp: 3 * i + 1,
        pip: 3 * i + 2,
        dip: None,
    });
    cfg.open_pose = Some(
        (0..5)
            .flat_map(|_| [0.0, -0.3, 0.0])
            .collect(),
    );
    cfg
}

/// Four fingers, 16 independent DOF (4 joints per finger).
pub fn four_finger_config() -> HandConfig {
    let mut cfg = build_claw("graspforge_four_finger", 4, |i| FingerDofs {
        spread: 4 * i,
        mcp: 4 * i + 1,
        pip: 4 * i + 2,
        dip: Some(4 * i + 3),
    });
    cfg.open_pose = Some(
        (0..4)
            .flat_map(|_| [0.0, -0.3, 0.0, 0.0])
            .collect(),
    );
    cfg
}
