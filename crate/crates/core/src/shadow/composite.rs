use super::light::LightSource;
use crate::error::{Error, Result};
use crate::raster::{TactileImage, WeightMap};

/// Multiplicative shadow attenuation:
/// `out_c = in_c · Π_i (1 − strength_i · mask_i · tint_i,c)`, clamped to 8 bits.
pub fn composite_shadows(img: &TactileImage, masks: &[(&WeightMap, &LightSource)]) -> Result<TactileImage> {
    let (w, h) = img.dims();
    for (mask, _) in masks {
        if mask.dims() != (w, h) {
            return Err(Error::DimensionMismatch { expected: (w, h), actual: mask.dims() });
        }
    }
    let mut out = img.clone();
    if masks.is_empty() {
        return Ok(out);
    }
    let data = out.data_mut();
    for i in 0..w * h {
        let mut factor = [1.0f32; 3];
        let mut any = false;
        for (mask, light) in masks {
            let m = mask.data()[i];
            if m == 0.0 {
                continue;
            }
            any = true;
            let k = light.strength as f32 * m;
            for (c, f) in factor.iter_mut().enumerate() {
                *f *= 1.0 - k * light.tint[c] as f32;
            }
        }
        if !any {
            continue;
        }
        for c in 0..3 {
            let v = data[3 * i + c] as f32 * factor[c];
            data[3 * i + c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}
