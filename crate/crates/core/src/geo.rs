//! Planar distance on lon/lat points via an equirectangular projection.
//!
//! County-scale extents keep the projection error far below parcel spacing,
//! so all inter-point distances in this crate are computed on a locally
//! flattened plane measured in miles.

/// Mean Earth radius in miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.7613;

/// Miles per degree of latitude (and of longitude at the equator).
pub const MILES_PER_DEGREE: f64 = EARTH_RADIUS_MILES * std::f64::consts::PI / 180.0;

/// Equirectangular projection anchored at a reference latitude.
///
/// Longitude degrees are scaled by cos(reference latitude) so that one
/// projected unit equals one mile in both axes.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    cos_ref_lat: f64,
}

impl Projection {
    pub fn new(reference_lat_deg: f64) -> Self {
        Self {
            cos_ref_lat: reference_lat_deg.to_radians().cos(),
        }
    }

    /// Projection anchored at the mean latitude of a point set.
    ///
    /// Returns `None` for an empty set.
    pub fn from_points<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a (f64, f64)>,
    {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (_, lat) in points {
            sum += lat;
            n += 1;
        }
        if n == 0 {
            None
        } else {
            Some(Self::new(sum / n as f64))
        }
    }

    /// Project (lon, lat) degrees to (x, y) miles.
    pub fn to_miles(&self, lon: f64, lat: f64) -> (f64, f64) {
        (lon * self.cos_ref_lat * MILES_PER_DEGREE, lat * MILES_PER_DEGREE)
    }

    /// Planar distance in miles between two lon/lat points.
    pub fn distance_miles(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let (ax, ay) = self.to_miles(a.0, a.1);
        let (bx, by) = self.to_miles(b.0, b.1);
        (ax - bx).hypot(ay - by)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_degree_latitude_is_about_69_miles() {
        let proj = Projection::new(0.0);
        let d = proj.distance_miles((0.0, 0.0), (0.0, 1.0));
        assert!((d - MILES_PER_DEGREE).abs() < 1e-9);
        assert!((d - 69.09).abs() < 0.01);
    }

    #[test]
    fn longitude_shrinks_with_latitude() {
        let proj = Projection::new(60.0);
        let d = proj.distance_miles((0.0, 60.0), (1.0, 60.0));
        assert!((d - MILES_PER_DEGREE * 0.5).abs() < 1e-9);
    }

    #[test]
    fn from_points_uses_mean_latitude() {
        let pts = [(0.0, 20.0), (0.0, 40.0)];
        let proj = Projection::from_points(pts.iter()).unwrap();
        let expect = Projection::new(30.0);
        assert_eq!(proj.cos_ref_lat, expect.cos_ref_lat);
        assert!(Projection::from_points([].iter()).is_none());
    }
}
