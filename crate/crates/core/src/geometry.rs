//! Face-to-pose verification.
//!
//! A face detector may fire on a bystander in the background of a person crop.
//! A detected face is attributed to the crop's main person only when the
//! main person's eye and nose keypoints, as reported by a pose estimator, all
//! fall inside the face box.

use serde::{Deserialize, Serialize};

use crate::model::FaceObservation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned box given by its top-left and bottom-right corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        BBox { x1, y1, x2, y2 }
    }

    pub fn is_well_ordered(&self) -> bool {
        self.x1 < self.x2 && self.y1 < self.y2
    }

    /// Boundary-inclusive containment.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x1 && p.x <= self.x2 && p.y >= self.y1 && p.y <= self.y2
    }
}

impl From<[f64; 4]> for BBox {
    fn from([x1, y1, x2, y2]: [f64; 4]) -> Self {
        BBox { x1, y1, x2, y2 }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

/// Eye and nose keypoints of a crop's main person.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoints {
    pub left_eye: Point,
    pub right_eye: Point,
    pub nose: Point,
}

impl Keypoints {
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let t = |p: Point| Point::new(p.x + dx, p.y + dy);
        Keypoints {
            left_eye: t(self.left_eye),
            right_eye: t(self.right_eye),
            nose: t(self.nose),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceMatchResult {
    pub matched: bool,
    pub chosen_face_index: Option<usize>,
}

impl FaceMatchResult {
    pub const NO_MATCH: FaceMatchResult = FaceMatchResult {
        matched: false,
        chosen_face_index: None,
    };

    fn chosen(index: usize) -> Self {
        FaceMatchResult {
            matched: true,
            chosen_face_index: Some(index),
        }
    }
}

pub fn face_inside_check(face_box: &BBox, left_eye: Point, right_eye: Point, nose: Point) -> bool {
    face_box.contains(left_eye) && face_box.contains(right_eye) && face_box.contains(nose)
}

/// Pick the detected face that belongs to the main person.
///
/// Among faces whose box holds all three keypoints, the highest `det_conf`
/// wins and remaining ties go to the lowest index. Missing keypoints mean the
/// face cannot be verified.
pub fn select_main_face(
    faces: &[FaceObservation],
    keypoints: Option<&Keypoints>,
) -> FaceMatchResult {
    let Some(kp) = keypoints else {
        return FaceMatchResult::NO_MATCH;
    };
    let mut best: Option<(usize, f64)> = None;
    for (i, face) in faces.iter().enumerate() {
        if !face_inside_check(&face.bbox, kp.left_eye, kp.right_eye, kp.nose) {
            continue;
        }
        match best {
            Some((_, conf)) if face.det_conf <= conf => {}
            _ => best = Some((i, face.det_conf)),
        }
    }
    best.map_or(FaceMatchResult::NO_MATCH, |(i, _)| {
        FaceMatchResult::chosen(i)
    })
}
