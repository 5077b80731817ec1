use serde::{Deserialize, Serialize};

/// A 2D position in nanometres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x_nm: f64,
    pub y_nm: f64,
}

impl Point {
    pub const fn new(x_nm: f64, y_nm: f64) -> Self {
        Self { x_nm, y_nm }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x_nm - other.x_nm).hypot(self.y_nm - other.y_nm)
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x_nm - other.x_nm;
        let dy = self.y_nm - other.y_nm;
        dx * dx + dy * dy
    }
}

impl From<(f64, f64)> for Point {
    fn from((x_nm, y_nm): (f64, f64)) -> Self {
        Self { x_nm, y_nm }
    }
}
