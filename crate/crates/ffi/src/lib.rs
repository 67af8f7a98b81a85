//! C ABI over the reface engine.
//!
//! Every entry point returns a [`RefaceStatus`]; on failure the message is
//! available from [`reface_last_error_message`] on the same thread. Handles
//! are opaque and must be released with their matching `_free` function.
//! Strings returned through out-parameters are owned by the caller and are
//! released with [`reface_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use reface::geometry::{BBox, Point};
use reface::model::{Gallery, IdentityLabel, Modality, Provenance};
use reface::pipeline::{
    annotate, evaluate_predictions, gallery_identities, load_predictions, RunConfig,
};
use reface::scoring::{self, ScoreSource, ScoreVector};
use reface::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefaceStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    Integrity = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefaceModality {
    Reid = 0,
    Face = 1,
}

/// A loaded run configuration.
pub struct RefaceEngine {
    config: RunConfig,
}

/// An identity-indexed set of unit vectors.
pub struct RefaceGallery {
    inner: Gallery,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(RefaceStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => RefaceStatus::Io,
            Error::Parse { .. } => RefaceStatus::Parse,
            Error::Validation { .. } => RefaceStatus::Validation,
            Error::Integrity(_) | Error::MissingEmbedding { .. } => RefaceStatus::Integrity,
            Error::DimMismatch { .. }
            | Error::InvalidArgument(_)
            | Error::Empty(_)
            | Error::Config(_) => RefaceStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RefaceStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(RefaceStatus::InvalidArgument, message.into())
}

fn set_last_error(message: Option<String>) {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() =
            message.map(|m| CString::new(m.replace('\0', " ")).expect("nul bytes removed"));
    });
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RefaceStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(None);
            RefaceStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(Some(message));
            status
        }
        Err(_) => {
            set_last_error(Some("internal panic".into()));
            RefaceStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("`{what}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn point_arg(p: *const f64, what: &str) -> Result<Point, Failure> {
    let s = slice_arg(p, 2, what)?;
    Ok(Point { x: s[0], y: s[1] })
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("nul bytes removed")
        .into_raw()
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn reface_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn reface_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn reface_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Load a TOML run configuration.
///
/// # Safety
/// `config_path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reface_engine_from_config(
    config_path: *const c_char,
    out: *mut *mut RefaceEngine,
) -> RefaceStatus {
    guard(|| {
        let path = str_arg(config_path, "config_path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = RunConfig::load(&PathBuf::from(path))?;
        config.validate()?;
        out.write(Box::into_raw(Box::new(RefaceEngine { config })));
        Ok(())
    })
}

/// Release an engine handle.
///
/// # Safety
/// `engine` must come from [`reface_engine_from_config`] and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn reface_engine_free(engine: *mut RefaceEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Override the fusion weight of a loaded configuration.
///
/// # Safety
/// `engine` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn reface_engine_set_alpha(
    engine: *mut RefaceEngine,
    alpha: f64,
) -> RefaceStatus {
    guard(|| {
        let engine = engine.as_mut().ok_or_else(|| null("engine"))?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(invalid(format!("alpha {alpha} outside [0,1]")));
        }
        engine.config.alpha = alpha;
        Ok(())
    })
}

/// Label every query track and write the prediction file to `out_path`.
///
/// # Safety
/// `engine` must be a live handle; `out_path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn reface_engine_annotate(
    engine: *const RefaceEngine,
    out_path: *const c_char,
) -> RefaceStatus {
    guard(|| {
        let engine = engine.as_ref().ok_or_else(|| null("engine"))?;
        let path = str_arg(out_path, "out_path")?;
        annotate(&engine.config)?.save(&PathBuf::from(path))?;
        Ok(())
    })
}

/// Evaluate a prediction file against the configured manifests. Writes the
/// metrics report as a JSON object to `out_json`.
///
/// # Safety
/// `engine` must be a live handle; `predictions_path` a nul-terminated
/// string; `out_json` writable. The returned string is freed with [`reface_string_free`].
#[no_mangle]
pub unsafe extern "C" fn reface_engine_evaluate(
    engine: *const RefaceEngine,
    predictions_path: *const c_char,
    out_json: *mut *mut c_char,
) -> RefaceStatus {
    guard(|| {
        let engine = engine.as_ref().ok_or_else(|| null("engine"))?;
        let path = str_arg(predictions_path, "predictions_path")?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let inputs = &engine.config.inputs;
        let (query, gallery) = match (&inputs.query_manifest, &inputs.gallery_manifest) {
            (Some(q), Some(g)) => (q, g),
            _ => return Err(invalid("configuration lacks gallery or query manifest")),
        };
        let query = reface::model::load_crop_manifest(query)?;
        let gallery = reface::model::load_crop_manifest(gallery)?;
        let report = evaluate_predictions(
            &load_predictions(&PathBuf::from(path))?,
            &query,
            &gallery_identities(&gallery),
            &engine.config.setting,
        )?;
        let json = serde_json::to_string(&report).map_err(|e| invalid(e.to_string()))?;
        out_json.write(into_c_string(json));
        Ok(())
    })
}

/// Cosine similarity of two unit vectors of length `dim`.
///
/// # Safety
/// `u` and `v` must point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reface_cosine_similarity(
    u: *const f64,
    v: *const f64,
    dim: usize,
    out: *mut f64,
) -> RefaceStatus {
    guard(|| {
        let s = scoring::cosine_similarity(slice_arg(u, dim, "u")?, slice_arg(v, dim, "v")?)?;
        write_out(out, s, "out")
    })
}

/// Element-wise `alpha * reid + (1 - alpha) * face` over `n` aligned scores.
///
/// # Safety
/// `reid`, `face` and `out` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn reface_fuse(
    reid: *const f64,
    face: *const f64,
    n: usize,
    alpha: f64,
    out: *mut f64,
) -> RefaceStatus {
    guard(|| {
        let labels: Vec<IdentityLabel> = (0..n)
            .map(|i| IdentityLabel::Known(format!("{i:020}")))
            .collect();
        let vector = |scores: &[f64], source| ScoreVector {
            scores: labels.iter().cloned().zip(scores.iter().copied()).collect(),
            source,
        };
        let fused = scoring::fuse(
            &vector(slice_arg(reid, n, "reid")?, ScoreSource::Reid),
            &vector(slice_arg(face, n, "face")?, ScoreSource::Face),
            alpha,
        )?;
        if out.is_null() {
            return Err(null("out"));
        }
        let out = std::slice::from_raw_parts_mut(out, n);
        for (slot, label) in out.iter_mut().zip(&labels) {
            *slot = fused.get(label);
        }
        Ok(())
    })
}

/// Whether both eyes and the nose lie inside `box` (`[x1, y1, x2, y2]`), edges included.
///
/// # Safety
/// `bbox` must point to 4 doubles, each keypoint to 2; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reface_face_inside(
    bbox: *const f64,
    left_eye: *const f64,
    right_eye: *const f64,
    nose: *const f64,
    out: *mut bool,
) -> RefaceStatus {
    guard(|| {
        let b = slice_arg(bbox, 4, "bbox")?;
        let bbox = BBox {
            x1: b[0],
            y1: b[1],
            x2: b[2],
            y2: b[3],
        };
        let inside = reface::geometry::face_inside_check(
            &bbox,
            point_arg(left_eye, "left_eye")?,
            point_arg(right_eye, "right_eye")?,
            point_arg(nose, "nose")?,
        );
        write_out(out, inside, "out")
    })
}

/// Create an empty gallery.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reface_gallery_new(
    modality: RefaceModality,
    out: *mut *mut RefaceGallery,
) -> RefaceStatus {
    guard(|| {
        let modality = match modality {
            RefaceModality::Reid => Modality::Reid,
            RefaceModality::Face => Modality::Face,
        };
        let g = Box::new(RefaceGallery {
            inner: Gallery::new(modality),
        });
        write_out(out, Box::into_raw(g), "out")
    })
}

/// Release a gallery handle.
///
/// # Safety
/// `gallery` must come from [`reface_gallery_new`] and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn reface_gallery_free(gallery: *mut RefaceGallery) {
    if !gallery.is_null() {
        drop(Box::from_raw(gallery));
    }
}

/// Add a vector under `label`. The vector is L2-normalized on insertion.
///
/// # Safety
/// `gallery` must be a live handle; strings nul-terminated; `vector` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn reface_gallery_add(
    gallery: *mut RefaceGallery,
    label: *const c_char,
    sample_id: *const c_char,
    vector: *const f64,
    dim: usize,
) -> RefaceStatus {
    guard(|| {
        let g = gallery.as_mut().ok_or_else(|| null("gallery"))?;
        let label: IdentityLabel = str_arg(label, "label")?.parse()?;
        let sample_id = str_arg(sample_id, "sample_id")?;
        let mut v = slice_arg(vector, dim, "vector")?.to_vec();
        if !reface::model::l2_normalize(&mut v) {
            return Err(invalid("vector has zero or non-finite norm"));
        }
        g.inner
            .insert(label, sample_id, &v, Provenance::OriginalLabeled)?;
        Ok(())
    })
}

/// Total number of vectors in the gallery.
///
/// # Safety
/// `gallery` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reface_gallery_len(
    gallery: *const RefaceGallery,
    out: *mut usize,
) -> RefaceStatus {
    guard(|| {
        let g = gallery.as_ref().ok_or_else(|| null("gallery"))?;
        write_out(out, g.inner.len(), "out")
    })
}

/// Highest similarity between `query` and any vector of `label`; 0 when the
/// label is absent.
///
/// # Safety
/// `gallery` must be a live handle; `label` nul-terminated; `query` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn reface_gallery_identity_confidence(
    gallery: *const RefaceGallery,
    label: *const c_char,
    query: *const f64,
    dim: usize,
    out: *mut f64,
) -> RefaceStatus {
    guard(|| {
        let g = gallery.as_ref().ok_or_else(|| null("gallery"))?;
        let label: IdentityLabel = str_arg(label, "label")?.parse()?;
        let query = slice_arg(query, dim, "query")?;
        if !g.inner.is_empty() && g.inner.dim() != dim {
            return Err(Error::DimMismatch {
                expected: g.inner.dim(),
                actual: dim,
            }
            .into());
        }
        write_out(
            out,
            scoring::identity_confidence(query, &g.inner, &label),
            "out",
        )
    })
}

/// Label a track of `n_images` unit vectors stored row-major in `vectors`.
/// Writes the predicted label and its mean confidence.
///
/// # Safety
/// `gallery` must be a live handle; `vectors` must point to
/// `n_images * dim` doubles; `out_label` and `out_score` writable. The label
/// is freed with [`reface_string_free`].
#[no_mangle]
pub unsafe extern "C" fn reface_gallery_predict_track(
    gallery: *const RefaceGallery,
    vectors: *const f64,
    n_images: usize,
    dim: usize,
    out_label: *mut *mut c_char,
    out_score: *mut f64,
) -> RefaceStatus {
    guard(|| {
        let g = gallery.as_ref().ok_or_else(|| null("gallery"))?;
        let total = n_images
            .checked_mul(dim)
            .ok_or_else(|| invalid("n_images * dim overflows"))?;
        let flat = slice_arg(vectors, total, "vectors")?;
        if out_label.is_null() {
            return Err(null("out_label"));
        }
        if out_score.is_null() {
            return Err(null("out_score"));
        }
        let images: Vec<&[f64]> = flat.chunks(dim.max(1)).collect();
        let v = scoring::track_score_vector(&images, &g.inner)?;
        let (label, score) = v.best().ok_or_else(|| invalid("gallery is empty"))?;
        out_score.write(score);
        out_label.write(into_c_string(label.to_string()));
        Ok(())
    })
}
