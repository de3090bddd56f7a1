use serde::{Deserialize, Serialize};

/// A point in meters. Ground nodes sit at `z = 0`, aerial nodes at their altitude.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn ground(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance_to(&self, other: &Position) -> f64 {
        distance(self, other)
    }

    /// Distance in the ground plane, ignoring altitude.
    pub fn horizontal_distance_to(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Euclidean distance including the altitude difference.
pub fn distance(a: &Position, b: &Position) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        let o = Position::default();
        assert_eq!(distance(&o, &o), 0.0);
        assert_eq!(distance(&o, &Position::ground(3.0, 4.0)), 5.0);
        // sqrt(900 + 1600 + 10000) = sqrt(12500)
        let d = distance(&o, &Position::new(30.0, 40.0, 100.0));
        assert!((d - 111.803_398_874_989_48).abs() < 1e-9);
    }

    #[test]
    fn horizontal_ignores_altitude() {
        let a = Position::new(0.0, 0.0, 100.0);
        let b = Position::ground(500.0, 0.0);
        assert_eq!(a.horizontal_distance_to(&b), 500.0);
        assert!(a.distance_to(&b) > 500.0);
    }
}
