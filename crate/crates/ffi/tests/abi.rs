use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use regunet_core::evalcli::error_accumulation;
use regunet_core::model::{rollout, RolloutMode};
use regunet_core::synthdata::{Dataset, Split};
use regunet_core::trainer::{load_named, train, TrainConfig};
use regunet_ffi::*;

const DATA: &str = "grid_nx = 9\ngrid_ny = 5\nlevels = 2\nsnapshot_count = 4\ntrain_count = 2\nval_count = 1\ntest_count = 2\n";
const TRAIN: &str = "levels = 2\nchannels = 4, 4, 8\nfine_steps = 1\ncoarse_steps = 2\nk = 3\nepochs = 1\nrecord_wall_time = false\n";

fn c(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(rg_last_error_message()) }.to_str().unwrap().to_string()
}

struct Fixture {
    _dir: tempfile::TempDir,
    data: std::path::PathBuf,
    checkpoint: std::path::PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("data.cfg");
    std::fs::write(&cfg, DATA).unwrap();
    let data = dir.path().join("data");
    let mut ds = ptr::null_mut();
    let st = unsafe { rg_dataset_generate(c(&cfg).as_ptr(), c(&data).as_ptr(), 9, 1, &mut ds) };
    assert_eq!(st, RgStatus::Ok, "{}", last_error());
    unsafe { rg_dataset_free(ds) };
    let cfg = TrainConfig::parse(TRAIN).unwrap();
    let out = dir.path().join("run");
    let run = train(&Dataset::open(&data).unwrap(), &cfg, &out, &mut |_| {}).unwrap();
    Fixture {
        data,
        checkpoint: run.checkpoint.unwrap(),
        _dir: dir,
    }
}

#[test]
fn rollout_and_curve_match_the_rust_api() {
    let f = fixture();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(rg_dataset_open(c(&f.data).as_ptr(), &mut ds), RgStatus::Ok);
        let mut n = 0;
        assert_eq!(rg_dataset_count(ds, RG_SPLIT_TEST, &mut n), RgStatus::Ok);
        assert_eq!(n, 2);

        let mut m = ptr::null_mut();
        let st = rg_model_load(c(&f.checkpoint).as_ptr(), ds, RG_VARIANT_REGUNET, &mut m);
        assert_eq!(st, RgStatus::Ok, "{}", last_error());
        let mut v = 99;
        assert_eq!(rg_model_variant(m, &mut v), RgStatus::Ok);
        assert_eq!(v, RG_VARIANT_REGUNET);

        let mut s = ptr::null_mut();
        assert_eq!(rg_dataset_sample(ds, RG_SPLIT_TEST, 1, &mut s), RgStatus::Ok);
        let (mut nodes, mut steps) = (0, 0);
        assert_eq!(rg_sample_shape(s, &mut nodes, &mut steps), RgStatus::Ok);
        assert_eq!((nodes, steps), (45, 4));
        let mut buf = vec![0.0; nodes * steps * 3];
        assert_eq!(rg_model_rollout(m, s, buf.as_mut_ptr(), buf.len()), RgStatus::Ok);

        let dataset = Dataset::open(&f.data).unwrap();
        let seqs = load_named(&dataset, Split::Test).unwrap();
        let model = regunet_core::evalcli::load_checkpoint(&f.checkpoint, &dataset.scenario, None).unwrap();
        let r = rollout(&model, &seqs[1].1, RolloutMode::Autoregressive).unwrap();
        let flat: Vec<f64> = r.positions.iter().flatten().flatten().copied().collect();
        assert_eq!(buf, flat);

        let mut truth = vec![0.0; buf.len()];
        assert_eq!(rg_sample_positions(s, truth.as_mut_ptr(), truth.len()), RgStatus::Ok);
        assert_eq!(truth[..nodes * 3], buf[..nodes * 3]);

        let mut curve = [f64::NAN; 8];
        let mut len = 0;
        let st = rg_error_accumulation(m, ds, RG_SPLIT_TEST, curve.as_mut_ptr(), curve.len(), &mut len);
        assert_eq!(st, RgStatus::Ok, "{}", last_error());
        let seqs: Vec<_> = seqs.into_iter().map(|(_, s)| s).collect();
        assert_eq!(curve[..len], error_accumulation(&model, &seqs).unwrap()[..]);
        assert_eq!(curve[0], 0.0);
        assert!(curve[len].is_nan());

        rg_sample_free(s);
        rg_model_free(m);
        rg_dataset_free(ds);
    }
}

#[test]
fn failures_report_status_and_message() {
    let f = fixture();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(rg_dataset_open(c(&f.data).as_ptr(), &mut ds), RgStatus::Ok);
        let mut m = ptr::null_mut();
        let st = rg_model_load(c(&f.checkpoint).as_ptr(), ds, RG_VARIANT_BASELINE1, &mut m);
        assert_eq!(st, RgStatus::InvalidInput);
        assert!(last_error().contains("baseline1"), "{}", last_error());
        assert!(m.is_null());
        assert_eq!(rg_model_load(c(&f.checkpoint).as_ptr(), ds, 17, &mut m), RgStatus::InvalidInput);

        let missing = f.data.join("missing.rgck");
        assert_eq!(rg_model_load(c(&missing).as_ptr(), ds, u32::MAX, &mut m), RgStatus::Io);
        assert!(last_error().contains("missing.rgck"));

        let bogus = f.data.join("manifest.txt");
        let mut s = ptr::null_mut();
        assert_eq!(rg_sample_load(c(&bogus).as_ptr(), &mut s), RgStatus::Format);

        let mut n = 0;
        assert_eq!(rg_dataset_count(ds, 3, &mut n), RgStatus::InvalidInput);
        assert_eq!(rg_dataset_count(ptr::null(), 0, &mut n), RgStatus::NullArgument);
        assert_eq!(rg_dataset_sample(ds, RG_SPLIT_VAL, 5, &mut s), RgStatus::InvalidInput);
        assert_eq!(rg_dataset_open(ptr::null(), &mut ds), RgStatus::NullArgument);

        assert_eq!(rg_dataset_sample(ds, RG_SPLIT_VAL, 0, &mut s), RgStatus::Ok);
        let mut small = [0.0; 3];
        assert_eq!(rg_sample_positions(s, small.as_mut_ptr(), 3), RgStatus::BufferTooSmall);
        assert_eq!(small, [0.0; 3]);

        rg_sample_free(s);
        rg_dataset_free(ds);
        rg_model_free(ptr::null_mut());
    }
}

#[test]
fn gradcheck_and_version() {
    let mut err = f64::NAN;
    assert_eq!(unsafe { rg_gradcheck(0, &mut err) }, RgStatus::Ok);
    assert!(err < 1e-5);
    let v = unsafe { CStr::from_ptr(rg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
