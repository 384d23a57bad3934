//! C ABI for the zeshot pipeline.
//!
//! Every fallible function returns a [`ZeshotStatus`]. On failure the message
//! for the calling thread is available from [`zeshot_last_error_message`] until
//! the next failing call on that thread. Strings handed out through `char **`
//! out-parameters are owned by the caller and must be released with
//! [`zeshot_string_free`]. Pipelines are opaque and released with
//! [`zeshot_pipeline_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::num::NonZeroUsize;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use zeshot::backend::mock::{MockConfig, MOCK_EMBEDDING_DIM};
use zeshot::backend::{HttpEmbedder, HttpGenerator, MockGenerator};
use zeshot::eval::{emit_report, evaluate, load_dataset, EvalOptions, ReportFormat};
use zeshot::matcher::cosine;
use zeshot::{BackendEndpoint, ImageRef, Pipeline, PipelineError, QuestionBank, Stage};

/// Result codes shared by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeshotStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Bank = 4,
    Generation = 5,
    Matching = 6,
    Backend = 7,
    Dataset = 8,
    Panic = 99,
}

/// Opaque pipeline handle.
pub struct ZeshotPipeline {
    inner: Pipeline,
}

struct Failure {
    status: ZeshotStatus,
    message: String,
}

impl Failure {
    fn new(status: ZeshotStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match e.stage() {
            Stage::Generation => ZeshotStatus::Generation,
            Stage::Matching => ZeshotStatus::Matching,
        };
        Failure::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn run(f: impl FnOnce() -> Result<(), Failure>) -> ZeshotStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ZeshotStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_last_error("internal panic");
            ZeshotStatus::Panic
        }
    }
}

unsafe fn required_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(
            ZeshotStatus::NullArgument,
            format!("{name} is null"),
        ));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure::new(
            ZeshotStatus::InvalidUtf8,
            format!("{name} is not valid UTF-8"),
        )
    })
}

unsafe fn optional_str<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        required_str(p, name).map(Some)
    }
}

unsafe fn write_string(out: *mut *mut c_char, value: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(
            ZeshotStatus::NullArgument,
            "output pointer is null",
        ));
    }
    let c = CString::new(value)
        .map_err(|_| Failure::new(ZeshotStatus::InvalidArgument, "result contains a NUL byte"))?;
    *out = c.into_raw();
    Ok(())
}

fn load_bank(path: Option<&str>) -> Result<QuestionBank, Failure> {
    match path {
        Some(p) => {
            QuestionBank::from_path(p).map_err(|e| Failure::new(ZeshotStatus::Bank, e.to_string()))
        }
        None => Ok(QuestionBank::floodnet_reference()),
    }
}

fn with_cache(pipeline: Pipeline, capacity: usize) -> Pipeline {
    match NonZeroUsize::new(capacity) {
        Some(cap) => pipeline.with_cache(cap),
        None => pipeline,
    }
}

unsafe fn write_pipeline(out: *mut *mut ZeshotPipeline, pipeline: Pipeline) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(
            ZeshotStatus::NullArgument,
            "output pointer is null",
        ));
    }
    *out = Box::into_raw(Box::new(ZeshotPipeline { inner: pipeline }));
    Ok(())
}

unsafe fn pipeline_ref<'a>(p: *const ZeshotPipeline) -> Result<&'a Pipeline, Failure> {
    p.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| Failure::new(ZeshotStatus::NullArgument, "pipeline is null"))
}

/// Library version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn zeshot_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failure on this thread, or NULL if none. The pointer
/// stays valid until the next failing call on the same thread. Do not free.
#[no_mangle]
pub extern "C" fn zeshot_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned through an out-parameter. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zeshot_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Cosine similarity of two vectors of length `len`.
///
/// # Safety
/// `u` and `v` must point to `len` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zeshot_cosine_similarity(
    u: *const f64,
    v: *const f64,
    len: usize,
    out: *mut f64,
) -> ZeshotStatus {
    run(|| {
        if u.is_null() || v.is_null() || out.is_null() {
            return Err(Failure::new(
                ZeshotStatus::NullArgument,
                "null vector or output",
            ));
        }
        let (u, v) = (
            std::slice::from_raw_parts(u, len),
            std::slice::from_raw_parts(v, len),
        );
        *out =
            cosine(u, v).map_err(|e| Failure::new(ZeshotStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Append `count` candidate answers to `question` the way constrained prompts
/// are built. With `count == 0` the question is returned unchanged.
///
/// # Safety
/// `question` must be a NUL-terminated string, `answers` must point to `count`
/// NUL-terminated strings (or be NULL when `count == 0`), `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zeshot_modify_prompt(
    question: *const c_char,
    answers: *const *const c_char,
    count: usize,
    out: *mut *mut c_char,
) -> ZeshotStatus {
    run(|| {
        let question = required_str(question, "question")?;
        if count > 0 && answers.is_null() {
            return Err(Failure::new(ZeshotStatus::NullArgument, "answers is null"));
        }
        let mut candidates = Vec::with_capacity(count);
        for i in 0..count {
            candidates.push(required_str(*answers.add(i), "answer")?);
        }
        write_string(out, zeshot::bank::modify_prompt(question, &candidates))
    })
}

/// Deterministic mock embedding of `text`. `out` must hold `len` doubles and
/// `len` must equal the mock dimension (64).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn zeshot_mock_embed(
    text: *const c_char,
    out: *mut f64,
    len: usize,
) -> ZeshotStatus {
    run(|| {
        let text = required_str(text, "text")?;
        if out.is_null() {
            return Err(Failure::new(ZeshotStatus::NullArgument, "output is null"));
        }
        if len != MOCK_EMBEDDING_DIM {
            return Err(Failure::new(
                ZeshotStatus::InvalidArgument,
                format!("mock embeddings have {MOCK_EMBEDDING_DIM} dimensions, buffer holds {len}"),
            ));
        }
        let v = zeshot::backend::mock::mock_embed(text)
            .map_err(|e| Failure::new(ZeshotStatus::Backend, e.to_string()))?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(v.values());
        Ok(())
    })
}

/// Create a pipeline backed by remote generator and embedder services.
/// `bank_path` may be NULL for the bundled reference bank; `timeout_ms == 0`
/// keeps the default timeout; `cache_capacity == 0` disables the embedding cache.
///
/// # Safety
/// String arguments must be NUL-terminated (or NULL where allowed); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zeshot_pipeline_new_http(
    bank_path: *const c_char,
    generator_url: *const c_char,
    embedder_url: *const c_char,
    timeout_ms: u64,
    cache_capacity: usize,
    out: *mut *mut ZeshotPipeline,
) -> ZeshotStatus {
    run(|| {
        let bank = load_bank(optional_str(bank_path, "bank_path")?)?;
        let mut gen = BackendEndpoint::generator(required_str(generator_url, "generator_url")?);
        let mut emb = BackendEndpoint::embedder(required_str(embedder_url, "embedder_url")?);
        if timeout_ms > 0 {
            gen = gen.with_timeout_ms(timeout_ms);
            emb = emb.with_timeout_ms(timeout_ms);
        }
        let backend_err =
            |e: zeshot::BackendError| Failure::new(ZeshotStatus::Backend, e.to_string());
        let generator = HttpGenerator::new(gen).map_err(backend_err)?;
        let embedder = HttpEmbedder::new(emb).map_err(backend_err)?;
        let pipeline = Pipeline::new(bank, Arc::new(generator), Arc::new(embedder));
        write_pipeline(out, with_cache(pipeline, cache_capacity))
    })
}

/// Create a pipeline backed by the in-process mocks. `mock_config_json` may be
/// NULL for a generator that always answers "unknown".
///
/// # Safety
/// String arguments must be NUL-terminated or NULL; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zeshot_pipeline_new_mock(
    bank_path: *const c_char,
    mock_config_json: *const c_char,
    cache_capacity: usize,
    out: *mut *mut ZeshotPipeline,
) -> ZeshotStatus {
    run(|| {
        let bank = load_bank(optional_str(bank_path, "bank_path")?)?;
        let (generator, embedder) = match optional_str(mock_config_json, "mock_config_json")? {
            Some(json) => {
                let config: MockConfig = serde_json::from_str(json)
                    .map_err(|e| Failure::new(ZeshotStatus::InvalidArgument, e.to_string()))?;
                (
                    MockGenerator::from_script(&config.generator),
                    config.embedder,
                )
            }
            None => (
                MockGenerator::new().with_default("unknown"),
                Default::default(),
            ),
        };
        let pipeline = Pipeline::new(bank, Arc::new(generator), Arc::new(embedder));
        write_pipeline(out, with_cache(pipeline, cache_capacity))
    })
}

/// Answer `question` about `image` (a path or http(s) URL). On success `out_json`
/// receives the answer record as JSON.
///
/// # Safety
/// `pipeline` must come from a constructor above; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn zeshot_pipeline_answer(
    pipeline: *const ZeshotPipeline,
    image: *const c_char,
    question: *const c_char,
    out_json: *mut *mut c_char,
) -> ZeshotStatus {
    run(|| {
        let pipeline = pipeline_ref(pipeline)?;
        let image = ImageRef::from_locator_str(required_str(image, "image")?);
        let record = pipeline.answer(&image, required_str(question, "question")?)?;
        let json = serde_json::to_string(&record)
            .map_err(|e| Failure::new(ZeshotStatus::InvalidArgument, e.to_string()))?;
        write_string(out_json, json)
    })
}

/// Evaluate the dataset document at `dataset_path` and render the report in
/// `format` ("json", "table-text" or "csv").
///
/// # Safety
/// `pipeline` must come from a constructor above; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn zeshot_pipeline_evaluate(
    pipeline: *const ZeshotPipeline,
    dataset_path: *const c_char,
    format: *const c_char,
    parallelism: usize,
    out_report: *mut *mut c_char,
) -> ZeshotStatus {
    run(|| {
        let pipeline = pipeline_ref(pipeline)?;
        let format: ReportFormat = required_str(format, "format")?
            .parse()
            .map_err(|e: String| Failure::new(ZeshotStatus::InvalidArgument, e))?;
        let items = load_dataset(required_str(dataset_path, "dataset_path")?)
            .map_err(|e| Failure::new(ZeshotStatus::Dataset, e.to_string()))?;
        let report = evaluate(
            pipeline,
            &items,
            EvalOptions {
                parallelism: parallelism.max(1),
            },
        );
        write_string(out_report, emit_report(&report, format))
    })
}

/// Release a pipeline. NULL is ignored.
///
/// # Safety
/// `pipeline` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn zeshot_pipeline_free(pipeline: *mut ZeshotPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}
