//! C interface to detoxkit.
//!
//! Every function returns a [`DetoxStatus`]. On failure the message is
//! available from [`detox_last_error`] on the same thread. Strings handed
//! out by the library must be released with [`detox_string_free`]; handles
//! with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use detox_core::edit::{extract_edits, EditRecord};
use detox_core::evaluation::{chrf, krippendorff_alpha, parse_annotations, similarity};
use detox_core::generator::{DeleteGenerator, Generator, Lexicon, LexiconGenerator};
use detox_core::pipeline::Pipeline;
use detox_core::tagger::{KeepTagger, PerceptronModel, Tagger};
use detox_core::text::tokenize_words;
use detox_core::toxicity::ClfModel;
use detox_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetoxStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Schema = 4,
    Protocol = 5,
    Invalid = 6,
    Script = 7,
    Panic = 8,
}

/// Tagger plus generator.
pub struct DetoxPipeline {
    tagger: Box<dyn Tagger>,
    generator: Box<dyn Generator>,
}

/// Trained toxicity classifier.
pub struct DetoxClassifier {
    model: ClfModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

enum Fail {
    Null(&'static str),
    Utf8(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> DetoxStatus {
    match e.kind() {
        "io" => DetoxStatus::Io,
        "schema" => DetoxStatus::Schema,
        "protocol" => DetoxStatus::Protocol,
        "script" => DetoxStatus::Script,
        _ => DetoxStatus::Invalid,
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> DetoxStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DetoxStatus::Ok,
        Ok(Err(Fail::Null(arg))) => {
            set_error(format!("{arg} is null"));
            DetoxStatus::NullArgument
        }
        Ok(Err(Fail::Utf8(arg))) => {
            set_error(format!("{arg} is not valid UTF-8"));
            DetoxStatus::InvalidUtf8
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            DetoxStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8(name))
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn opt_str_arg<'a>(p: *const c_char, name: &'static str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

fn out_ptr<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Fail> {
    // SAFETY: non-null out pointers are required to be valid and writable.
    unsafe { p.as_mut() }.ok_or(Fail::Null(name))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NUL bytes removed").into_raw()
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn detox_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn detox_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a pipeline. A null `tagger_model` means every token is kept; a
/// null `lexicon` means masked spans are deleted.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn detox_pipeline_new(
    tagger_model: *const c_char,
    lexicon: *const c_char,
    out: *mut *mut DetoxPipeline,
) -> DetoxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let tagger: Box<dyn Tagger> = match opt_str_arg(tagger_model, "tagger_model")? {
            None => Box::new(KeepTagger),
            Some(path) => {
                let model: PerceptronModel = detox_core::io::read_json(Path::new(path))?;
                model.check_format()?;
                Box::new(model)
            }
        };
        let generator: Box<dyn Generator> = match opt_str_arg(lexicon, "lexicon")? {
            None => Box::new(DeleteGenerator),
            Some(path) => Box::new(LexiconGenerator { lexicon: Lexicon::load(Path::new(path))? }),
        };
        *out = Box::into_raw(Box::new(DetoxPipeline { tagger, generator }));
        Ok(())
    })
}

/// Detoxifies one sentence; the result goes to `*out`.
///
/// # Safety
/// `pipeline` must come from [`detox_pipeline_new`]; `text` must be
/// NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn detox_pipeline_run(
    pipeline: *const DetoxPipeline,
    text: *const c_char,
    out: *mut *mut c_char,
) -> DetoxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let p = pipeline.as_ref().ok_or(Fail::Null("pipeline"))?;
        let text = str_arg(text, "text")?;
        let result = Pipeline::new(p.tagger.as_ref(), p.generator.as_ref()).run(text)?;
        *out = to_c_string(result.output);
        Ok(())
    })
}

/// # Safety
/// `pipeline` must be null or come from [`detox_pipeline_new`], and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn detox_pipeline_free(pipeline: *mut DetoxPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}

/// Edit record of `source` → `target` as JSON:
/// `{source, target, tags, gaps, ops}`.
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn detox_extract_edits_json(
    source: *const c_char,
    target: *const c_char,
    case_fold: bool,
    out: *mut *mut c_char,
) -> DetoxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let source = str_arg(source, "source")?;
        let target = str_arg(target, "target")?;
        let script = extract_edits(&tokenize_words(source), &tokenize_words(target), case_fold);
        let record = EditRecord::new(source, target, &script);
        *out = to_c_string(serde_json::to_string(&record).expect("edit records serialize"));
        Ok(())
    })
}

/// Loads a classifier written by `detoxkit train-clf`.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn detox_classifier_load(path: *const c_char, out: *mut *mut DetoxClassifier) -> DetoxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let model: ClfModel = detox_core::io::read_json(Path::new(str_arg(path, "path")?))?;
        model.check_format()?;
        *out = Box::into_raw(Box::new(DetoxClassifier { model }));
        Ok(())
    })
}

/// Probability that `text` is toxic.
///
/// # Safety
/// `classifier` must come from [`detox_classifier_load`]; `text` must be
/// NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn detox_classifier_score(
    classifier: *const DetoxClassifier,
    text: *const c_char,
    out: *mut f64,
) -> DetoxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let c = classifier.as_ref().ok_or(Fail::Null("classifier"))?;
        *out = c.model.predict_proba(str_arg(text, "text")?);
        Ok(())
    })
}

/// # Safety
/// `classifier` must be null or come from [`detox_classifier_load`], and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn detox_classifier_free(classifier: *mut DetoxClassifier) {
    if !classifier.is_null() {
        drop(Box::from_raw(classifier));
    }
}

/// Default content similarity between a source and its rewrite.
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn detox_sim(source: *const c_char, output: *const c_char, out: *mut f64) -> DetoxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let (s, o) = (str_arg(source, "source")?, str_arg(output, "output")?);
        *out = chrf(s, o, similarity::CHRF_MAX_ORDER, similarity::CHRF_BETA);
        Ok(())
    })
}

/// Krippendorff's alpha for annotations given as TSV text
/// (`sample_id<TAB>worker_id<TAB>answer` per line). `degenerate` is set when
/// all answers were identical.
///
/// # Safety
/// `annotations_tsv` must be NUL-terminated; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn detox_alpha(
    annotations_tsv: *const c_char,
    out: *mut f64,
    degenerate: *mut bool,
) -> DetoxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let degenerate = out_ptr(degenerate, "degenerate")?;
        let records = parse_annotations("<tsv>", str_arg(annotations_tsv, "annotations_tsv")?)?;
        let alpha = krippendorff_alpha(&records)?;
        *out = alpha.value;
        *degenerate = alpha.degenerate;
        Ok(())
    })
}
