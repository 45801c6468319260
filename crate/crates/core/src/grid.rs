//! Flat indexing for uniform 2D/3D grids.
//!
//! Fields are stored as flat `Vec<f64>` in x-fastest order; unused trailing
//! axes have extent 1 so the same code paths serve d = 2 and d = 3.

/// Shape of a d-dimensional uniform grid (d = 2 or 3).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridShape {
    pub d: usize,
    dims: [usize; 3],
}

impl GridShape {
    pub fn new(d: usize, dims: &[usize]) -> Self {
        assert!(d == 2 || d == 3, "only d=2 and d=3 are supported");
        assert_eq!(dims.len(), d);
        let mut padded = [1usize; 3];
        padded[..d].copy_from_slice(dims);
        GridShape { d, dims: padded }
    }

    pub fn cube(d: usize, n: usize) -> Self {
        match d {
            2 => Self::new(2, &[n, n]),
            _ => Self::new(3, &[n, n, n]),
        }
    }

    #[inline]
    pub fn extent(&self, axis: usize) -> usize {
        self.dims[axis]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let x = i % self.dims[0];
        let rest = i / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    /// Neighbor with periodic wrap along `axis`; `step` is -1 or +1.
    #[inline]
    pub fn wrap_neighbor(&self, i: usize, axis: usize, step: isize) -> usize {
        let mut c = self.coords(i);
        let n = self.dims[axis];
        c[axis] = (c[axis] + n).wrapping_add_signed(step) % n;
        self.index(c)
    }

    /// Neighbor inside the box, or `None` past the boundary.
    #[inline]
    pub fn box_neighbor(&self, i: usize, axis: usize, step: isize) -> Option<usize> {
        let mut c = self.coords(i);
        let moved = c[axis].checked_add_signed(step)?;
        if moved >= self.dims[axis] {
            return None;
        }
        c[axis] = moved;
        Some(self.index(c))
    }
}
