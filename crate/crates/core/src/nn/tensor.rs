use crate::raster::Image;

/// Dense `f64` tensor. Image-like tensors are channel-major `[C, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor shape {shape:?} does not match {} values",
            data.len()
        );
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshaped(mut self, shape: Vec<usize>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), self.data.len());
        self.shape = shape;
        self
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `[H, W, C]` image to `[C, H, W]` tensor.
    pub fn from_image(image: &Image) -> Self {
        let (h, w, c) = (image.height(), image.width(), image.channels());
        let src = image.data();
        let mut data = vec![0.0; h * w * c];
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    data[(ch * h + y) * w + x] = f64::from(src[(y * w + x) * c + ch]);
                }
            }
        }
        Self {
            shape: vec![c, h, w],
            data,
        }
    }

    /// Inverse of [`Tensor::from_image`]. Panics unless the tensor is rank 3.
    pub fn to_image(&self) -> Image {
        let (c, h, w) = match self.shape.as_slice() {
            [c, h, w] => (*c, *h, *w),
            other => panic!("expected [C, H, W] tensor, got {other:?}"),
        };
        let mut data = vec![0.0f32; h * w * c];
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    data[(y * w + x) * c + ch] = self.data[(ch * h + y) * w + x] as f32;
                }
            }
        }
        Image::new(h, w, c, data).expect("sizes agree")
    }
}
