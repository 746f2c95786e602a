//! Vectors and attitude.
//!
//! Frames follow the aerospace body convention: x forward, y right, z down.
//! Positive yaw turns the nose toward +y, positive pitch raises the nose and
//! positive roll lowers the right wing. Attitude is a 3-2-1 Euler sequence.

use core::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.dot(self))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

pub fn deg(rad: f64) -> f64 {
    rad * 180.0 / core::f64::consts::PI
}

pub fn rad(deg: f64) -> f64 {
    deg * core::f64::consts::PI / 180.0
}

/// Wrap an angle into [-180, 180).
pub fn wrap_180(angle: f64) -> f64 {
    let mut a = libm::fmod(angle + 180.0, 360.0);
    if a < 0.0 {
        a += 360.0;
    }
    a - 180.0
}

/// Row-major 3x3 rotation matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation([[f64; 3]; 3]);

impl Rotation {
    /// Body-to-world rotation for yaw/pitch/roll in degrees.
    pub fn from_euler(yaw: f64, pitch: f64, roll: f64) -> Self {
        let (sy, cy) = libm::sincos(rad(yaw));
        let (sp, cp) = libm::sincos(rad(pitch));
        let (sr, cr) = libm::sincos(rad(roll));
        // Rz(yaw) * Ry(pitch) * Rx(roll)
        Rotation([
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ])
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn apply_transpose(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z,
        )
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        let a = &self.0;
        let b = &other.0;
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Rotation(out)
    }

    /// (yaw, pitch, roll) in degrees, yaw and roll in [-180, 180),
    /// pitch in [-90, 90].
    pub fn to_euler(&self) -> (f64, f64, f64) {
        let m = &self.0;
        let pitch = deg(libm::asin((-m[2][0]).clamp(-1.0, 1.0)));
        let yaw = deg(libm::atan2(m[1][0], m[0][0]));
        let roll = deg(libm::atan2(m[2][1], m[2][2]));
        (wrap_180(yaw), pitch, wrap_180(roll))
    }
}

/// Chaser pose: world position in meters and attitude in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Pose {
    pub fn new(position: Vec3, yaw: f64, pitch: f64, roll: f64) -> Self {
        Pose { position, yaw, pitch, roll }.normalized()
    }

    pub fn rotation(&self) -> Rotation {
        Rotation::from_euler(self.yaw, self.pitch, self.roll)
    }

    /// Bring the attitude back into the canonical ranges, flipping through
    /// the pole when pitch leaves [-90, 90].
    pub fn normalized(self) -> Self {
        let mut pitch = wrap_180(self.pitch);
        let mut yaw = self.yaw;
        let mut roll = self.roll;
        if pitch > 90.0 {
            pitch = 180.0 - pitch;
            yaw += 180.0;
            roll += 180.0;
        } else if pitch < -90.0 {
            pitch = -180.0 - pitch;
            yaw += 180.0;
            roll += 180.0;
        }
        Pose { position: self.position, yaw: wrap_180(yaw), pitch, roll: wrap_180(roll) }
    }

    /// Apply a body-frame increment: translation is expressed in the current
    /// body axes, rotation is composed on the body side.
    pub fn apply_body_delta(&self, translation: Vec3, dyaw: f64, dpitch: f64, droll: f64) -> Pose {
        let rot = self.rotation();
        let position = self.position + rot.apply(translation);
        if dyaw == 0.0 && dpitch == 0.0 && droll == 0.0 {
            return Pose { position, ..*self };
        }
        if self.pitch == 0.0 && self.roll == 0.0 && dpitch == 0.0 && droll == 0.0 {
            // Pure heading change from a level attitude; exact in degrees.
            return Pose::new(position, self.yaw + dyaw, 0.0, 0.0);
        }
        let composed = rot.compose(&Rotation::from_euler(dyaw, dpitch, droll));
        let (yaw, pitch, roll) = composed.to_euler();
        Pose { position, yaw, pitch, roll }
    }
}

/// Bearing of `target` seen from `pose`: (azimuth, elevation, distance).
/// Azimuth is positive to the right, elevation positive above the boresight.
pub fn bearing(pose: &Pose, target: Vec3) -> (f64, f64, f64) {
    let rel = target - pose.position;
    let body = pose.rotation().apply_transpose(rel);
    let az = deg(libm::atan2(body.y, body.x));
    let el = deg(libm::atan2(-body.z, libm::hypot(body.x, body.y)));
    (az, el, rel.norm())
}

/// Angle in degrees between the boresight and the direction to `target`.
pub fn off_boresight(pose: &Pose, target: Vec3) -> f64 {
    let rel = target - pose.position;
    let n = rel.norm();
    if n == 0.0 {
        return 0.0;
    }
    let body = pose.rotation().apply_transpose(rel);
    deg(libm::acos((body.x / n).clamp(-1.0, 1.0)))
}

/// Smallest distance from `point` to the segment `a`..`b`, with the segment
/// parameter where it is reached.
pub fn segment_closest(a: Vec3, b: Vec3, point: Vec3) -> (f64, f64) {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return ((point - a).norm(), 0.0);
    }
    let t = ((point - a).dot(d) / len2).clamp(0.0, 1.0);
    ((a + d * t - point).norm(), t)
}
