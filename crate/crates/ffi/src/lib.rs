//! C ABI over `urp`.
//!
//! Conventions:
//! - every fallible call returns a [`UrpStatus`]; results go through out-pointers;
//! - on failure, [`urp_last_error_message`] describes the most recent error on
//!   the calling thread;
//! - datasets and trees are opaque handles released with their `_free` function;
//! - strings returned by the library are released with [`urp_string_free`];
//! - panics never cross the boundary; they surface as `URP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use urp::prune::{cv_prune_tree, ic_prune, CvOptions, IcOptions, InfoCriterion};
use urp::sim::adjusted_rand_index;
use urp::{fit_ols, load_csv, select_variable, Dataset, Error, GrowControl, Schema, SplitColumn, StrategyConfig, Tree};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UrpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InsufficientData = 5,
    Degenerate = 6,
    DimensionMismatch = 7,
    Unsupported = 8,
    SchemaMismatch = 9,
    BufferTooSmall = 10,
    Panic = 99,
}

/// Growth parameters; obtain defaults from [`urp_grow_control_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct UrpGrowControl {
    pub alpha: f64,
    pub min_node_size: usize,
    /// 0 selects the per-node default.
    pub min_segment: usize,
    pub max_depth: usize,
    pub prepruning: bool,
}

pub struct UrpDataset {
    inner: Dataset,
}

pub struct UrpTree {
    inner: Tree,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(UrpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => UrpStatus::Io,
            Error::Csv(_) | Error::Json(_) | Error::MissingValue { .. } | Error::NonNumeric { .. } => UrpStatus::Parse,
            Error::InsufficientData { .. } => UrpStatus::InsufficientData,
            Error::DegenerateRegressor | Error::ConstantColumn | Error::NoAdmissibleSplit => UrpStatus::Degenerate,
            Error::DimensionMismatch(_) | Error::IndexOutOfRange { .. } => UrpStatus::DimensionMismatch,
            Error::UnsupportedConfiguration(_) => UrpStatus::Unsupported,
            Error::SchemaMismatch(_) | Error::UnknownColumn(_) | Error::CategoricalInput(_) => UrpStatus::SchemaMismatch,
            Error::InvalidConfig(_) => UrpStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: UrpStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UrpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            UrpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            UrpStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(UrpStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return fail(UrpStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(UrpStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(UrpStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(UrpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(UrpStatus::NullPointer, format!("{what} is null")))
}

fn strategy(name: &str, alpha: f64) -> Result<StrategyConfig, Failure> {
    let config: StrategyConfig = name
        .parse()
        .map_err(|e: Error| Failure(UrpStatus::InvalidArgument, e.to_string()))?;
    let config = config.with_alpha(alpha);
    config.validate()?;
    Ok(config)
}

fn names(list: &str) -> Vec<&str> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn urp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn urp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn urp_grow_control_default() -> UrpGrowControl {
    let c = GrowControl::default();
    UrpGrowControl {
        alpha: c.alpha,
        min_node_size: c.min_node_size,
        min_segment: c.min_segment.unwrap_or(0),
        max_depth: c.max_depth,
        prepruning: c.prepruning,
    }
}

/// Creates a dataset of `n` rows with no split variables.
///
/// # Safety
/// `y` and `x` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn urp_dataset_new(y: *const f64, x: *const f64, n: usize, out_ds: *mut *mut UrpDataset) -> UrpStatus {
    guard(|| {
        let out_ds = out(out_ds, "out")?;
        let y = slice(y, n, "y")?.to_vec();
        let x = slice(x, n, "x")?.to_vec();
        let inner = Dataset::new(y, x, Vec::new())?;
        *out_ds = Box::into_raw(Box::new(UrpDataset { inner }));
        Ok(())
    })
}

fn push_column(ds: &mut UrpDataset, col: SplitColumn) -> Result<(), Failure> {
    if ds.inner.column(&col.name).is_some() {
        return fail(UrpStatus::InvalidArgument, format!("duplicate split variable `{}`", col.name));
    }
    let d = &ds.inner;
    let mut z = d.z.clone();
    z.push(col);
    ds.inner = Dataset::with_names(d.response.clone(), d.regressor.clone(), d.y.clone(), d.x.clone(), z)?;
    Ok(())
}

/// # Safety
/// `ds` must be a live dataset; `values` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn urp_dataset_add_numeric(ds: *mut UrpDataset, name: *const c_char, values: *const f64, n: usize) -> UrpStatus {
    guard(|| {
        let ds = out(ds, "dataset")?;
        let name = string(name, "name")?;
        let values = slice(values, n, "values")?.to_vec();
        push_column(ds, SplitColumn::numeric(name, values))
    })
}

/// Adds a categorical split variable; `codes[i]` indexes `levels`.
///
/// # Safety
/// `ds` must be a live dataset; `codes` must point to `n` values and
/// `levels` to `n_levels` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn urp_dataset_add_categorical(
    ds: *mut UrpDataset,
    name: *const c_char,
    codes: *const u32,
    n: usize,
    levels: *const *const c_char,
    n_levels: usize,
) -> UrpStatus {
    guard(|| {
        let ds = out(ds, "dataset")?;
        let name = string(name, "name")?;
        let codes = slice(codes, n, "codes")?.to_vec();
        let levels = slice(levels, n_levels, "levels")?
            .iter()
            .map(|&p| string(p, "level").map(str::to_owned))
            .collect::<Result<Vec<_>, _>>()?;
        push_column(ds, SplitColumn::categorical(name, codes, levels))
    })
}

/// Loads a CSV file. `split` and `categorical` are comma-separated column
/// lists; `categorical` may be null.
///
/// # Safety
/// String arguments must be NUL-terminated; `out_ds` must be writable.
#[no_mangle]
pub unsafe extern "C" fn urp_dataset_load_csv(
    path: *const c_char,
    response: *const c_char,
    regressor: *const c_char,
    split: *const c_char,
    categorical: *const c_char,
    out_ds: *mut *mut UrpDataset,
) -> UrpStatus {
    guard(|| {
        let out_ds = out(out_ds, "out")?;
        let path = string(path, "path")?;
        let split = names(string(split, "split")?);
        let categorical = if categorical.is_null() { Vec::new() } else { names(string(categorical, "categorical")?) };
        let schema = Schema::new(string(response, "response")?, string(regressor, "regressor")?, &split)
            .with_categorical(&categorical);
        let inner = load_csv(path, &schema)?;
        *out_ds = Box::into_raw(Box::new(UrpDataset { inner }));
        Ok(())
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset.
#[no_mangle]
pub unsafe extern "C" fn urp_dataset_n(ds: *const UrpDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n())
}

/// Number of split variables, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset.
#[no_mangle]
pub unsafe extern "C" fn urp_dataset_n_split(ds: *const UrpDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_split())
}

/// # Safety
/// `ds` must be null or a dataset not yet freed.
#[no_mangle]
pub unsafe extern "C" fn urp_dataset_free(ds: *mut UrpDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Tests every split variable against the full-sample fit. Writes one
/// p-value per split variable and the chosen index (-1 when no p-value falls
/// below `alpha`). Degenerate tests report a p-value of 1.
///
/// # Safety
/// `p_values` must hold `len` doubles with `len >= urp_dataset_n_split(ds)`.
#[no_mangle]
pub unsafe extern "C" fn urp_select_variable(
    ds: *const UrpDataset,
    strategy_name: *const c_char,
    alpha: f64,
    p_values: *mut f64,
    len: usize,
    out_chosen: *mut i64,
) -> UrpStatus {
    guard(|| {
        let d = &handle(ds, "dataset")?.inner;
        let config = strategy(string(strategy_name, "strategy")?, alpha)?;
        let chosen = out(out_chosen, "chosen")?;
        if len < d.n_split() {
            return fail(UrpStatus::BufferTooSmall, format!("need {} p-value slots, got {len}", d.n_split()));
        }
        let p_values = slice_mut(p_values, len, "p_values")?;
        let fit = fit_ols(&d.y, &d.x)?;
        let sel = select_variable(&config, &fit, d)?;
        for (slot, o) in p_values.iter_mut().zip(&sel.outcomes) {
            *slot = o.p_value;
        }
        *chosen = sel.chosen.map_or(-1, |j| j as i64);
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live dataset, `control` null (defaults) or valid, and
/// `out_tree` writable.
#[no_mangle]
pub unsafe extern "C" fn urp_tree_grow(
    ds: *const UrpDataset,
    strategy_name: *const c_char,
    control: *const UrpGrowControl,
    out_tree: *mut *mut UrpTree,
) -> UrpStatus {
    guard(|| {
        let d = &handle(ds, "dataset")?.inner;
        let out_tree = out(out_tree, "out")?;
        let c = control.as_ref().copied().unwrap_or_else(|| urp_grow_control_default());
        let control = GrowControl {
            alpha: c.alpha,
            min_node_size: c.min_node_size,
            min_segment: (c.min_segment > 0).then_some(c.min_segment),
            max_depth: c.max_depth,
            prepruning: c.prepruning,
        };
        control.validate()?;
        let config = strategy(string(strategy_name, "strategy")?, c.alpha)?;
        let inner = urp::grow(d, &config, &control)?;
        *out_tree = Box::into_raw(Box::new(UrpTree { inner }));
        Ok(())
    })
}

/// Cost-complexity pruning with the penalty chosen by `folds`-fold
/// cross-validation on `ds`.
///
/// # Safety
/// Handles must be live; `out_tree` writable.
#[no_mangle]
pub unsafe extern "C" fn urp_tree_prune_cv(
    tree: *const UrpTree,
    ds: *const UrpDataset,
    folds: usize,
    seed: u64,
    one_se: bool,
    out_tree: *mut *mut UrpTree,
) -> UrpStatus {
    guard(|| {
        let t = &handle(tree, "tree")?.inner;
        let d = &handle(ds, "dataset")?.inner;
        let out_tree = out(out_tree, "out")?;
        let r = cv_prune_tree(t, d, &CvOptions { folds, seed, one_se })?;
        *out_tree = Box::into_raw(Box::new(UrpTree { inner: r.tree }));
        Ok(())
    })
}

/// Information-criterion pruning: `criterion` is "aic" or "bic".
///
/// # Safety
/// `tree` must be live; `out_tree` writable.
#[no_mangle]
pub unsafe extern "C" fn urp_tree_prune_ic(tree: *const UrpTree, criterion: *const c_char, out_tree: *mut *mut UrpTree) -> UrpStatus {
    guard(|| {
        let t = &handle(tree, "tree")?.inner;
        let criterion: InfoCriterion = string(criterion, "criterion")?
            .parse()
            .map_err(|e: Error| Failure(UrpStatus::InvalidArgument, e.to_string()))?;
        let out_tree = out(out_tree, "out")?;
        let inner = ic_prune(t, criterion, &IcOptions::default());
        *out_tree = Box::into_raw(Box::new(UrpTree { inner }));
        Ok(())
    })
}

/// # Safety
/// `tree` must be null or a live tree.
#[no_mangle]
pub unsafe extern "C" fn urp_tree_n_leaves(tree: *const UrpTree) -> usize {
    tree.as_ref().map_or(0, |t| t.inner.n_leaves())
}

/// # Safety
/// `tree` must be null or a live tree.
#[no_mangle]
pub unsafe extern "C" fn urp_tree_depth(tree: *const UrpTree) -> usize {
    tree.as_ref().map_or(0, |t| t.inner.depth())
}

/// Serializes the tree; free the result with [`urp_string_free`].
///
/// # Safety
/// `tree` must be live; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn urp_tree_to_json(tree: *const UrpTree, out_json: *mut *mut c_char) -> UrpStatus {
    guard(|| {
        let t = &handle(tree, "tree")?.inner;
        let out_json = out(out_json, "out")?;
        let s = CString::new(t.to_json()).or_else(|_| fail(UrpStatus::Panic, "tree JSON contains NUL"))?;
        *out_json = s.into_raw();
        Ok(())
    })
}

/// Loads a tree document and refits its nodes on `ds`.
///
/// # Safety
/// `json` must be NUL-terminated, `ds` live, `out_tree` writable.
#[no_mangle]
pub unsafe extern "C" fn urp_tree_from_json(json: *const c_char, ds: *const UrpDataset, out_tree: *mut *mut UrpTree) -> UrpStatus {
    guard(|| {
        let text = string(json, "json")?;
        let d = &handle(ds, "dataset")?.inner;
        let out_tree = out(out_tree, "out")?;
        let inner = Tree::from_json(text, d)?;
        *out_tree = Box::into_raw(Box::new(UrpTree { inner }));
        Ok(())
    })
}

/// Leaf-model predictions for every row of `ds`.
///
/// # Safety
/// `out_values` must hold `len >= urp_dataset_n(ds)` doubles.
#[no_mangle]
pub unsafe extern "C" fn urp_tree_predict(tree: *const UrpTree, ds: *const UrpDataset, out_values: *mut f64, len: usize) -> UrpStatus {
    guard(|| {
        let t = &handle(tree, "tree")?.inner;
        let d = &handle(ds, "dataset")?.inner;
        if len < d.n() {
            return fail(UrpStatus::BufferTooSmall, format!("need {} slots, got {len}", d.n()));
        }
        let dst = slice_mut(out_values, len, "out")?;
        for (slot, v) in dst.iter_mut().zip(t.predict(d)?) {
            *slot = v;
        }
        Ok(())
    })
}

/// Leaf node id of every row of `ds`.
///
/// # Safety
/// `out_labels` must hold `len >= urp_dataset_n(ds)` values.
#[no_mangle]
pub unsafe extern "C" fn urp_tree_labels(tree: *const UrpTree, ds: *const UrpDataset, out_labels: *mut usize, len: usize) -> UrpStatus {
    guard(|| {
        let t = &handle(tree, "tree")?.inner;
        let d = &handle(ds, "dataset")?.inner;
        if len < d.n() {
            return fail(UrpStatus::BufferTooSmall, format!("need {} slots, got {len}", d.n()));
        }
        let dst = slice_mut(out_labels, len, "out")?;
        for (slot, v) in dst.iter_mut().zip(t.partition_labels(d)?) {
            *slot = v;
        }
        Ok(())
    })
}

/// # Safety
/// `tree` must be null or a tree not yet freed.
#[no_mangle]
pub unsafe extern "C" fn urp_tree_free(tree: *mut UrpTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Adjusted Rand index between two labelings of `n` items.
///
/// # Safety
/// `a` and `b` must point to `n` values; `out_ari` must be writable.
#[no_mangle]
pub unsafe extern "C" fn urp_adjusted_rand_index(a: *const usize, b: *const usize, n: usize, out_ari: *mut f64) -> UrpStatus {
    guard(|| {
        let a = slice(a, n, "a")?;
        let b = slice(b, n, "b")?;
        let dst = out(out_ari, "out")?;
        *dst = adjusted_rand_index(a, b)?;
        Ok(())
    })
}
