use std::ffi::{c_char, CString};
use std::ptr;

use c2f_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { c2f_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn image(h: usize, w: usize) -> *mut C2fTensor {
    let dims = [h, w, 3];
    let data: Vec<f64> = (0..h * w * 3)
        .map(|i| {
            let (y, x, c) = (i % h, (i / h) % w, i / (h * w));
            0.5 + 0.3 * ((y as f64 * 0.3).sin() * (x as f64 * 0.2 + c as f64).cos())
        })
        .collect();
    let mut t = ptr::null_mut();
    let s = unsafe { c2f_tensor_new(dims.as_ptr(), 3, data.as_ptr(), data.len(), &mut t) };
    assert_eq!(s, C2fStatus::Ok);
    t
}

#[test]
fn full_restoration_round_trip() {
    unsafe {
        let truth = image(24, 24);
        let dims = [24usize, 24, 3];
        let mut mask = ptr::null_mut();
        assert_eq!(
            c2f_mask_generate(dims.as_ptr(), 3, 0.5, 3, false, &mut mask),
            C2fStatus::Ok
        );
        assert_eq!(c2f_mask_observed_count(mask), 24 * 24 * 3 - 864);
        let mut y = ptr::null_mut();
        assert_eq!(c2f_mask_apply(mask, truth, &mut y), C2fStatus::Ok);

        let mut plan = ptr::null_mut();
        assert_eq!(
            c2f_plan_new(C2fSolver::TraceNorm, 3, &mut plan),
            C2fStatus::Ok
        );
        assert_eq!(c2f_plan_set_schedule(plan, 2, 0.15, 1.5), C2fStatus::Ok);
        let overlap = [2usize];
        assert_eq!(
            c2f_plan_set_overlap(plan, overlap.as_ptr(), 1),
            C2fStatus::Ok
        );
        let cfg = CString::new("max_iters = 60").unwrap();
        assert_eq!(c2f_plan_set_config_toml(plan, cfg.as_ptr()), C2fStatus::Ok);

        let mut result = ptr::null_mut();
        assert_eq!(
            c2f_run(y, mask, plan, &mut result),
            C2fStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(c2f_result_stage_count(result), 2);
        let (mut stage, mut patches, mut replaced) = (0, 0, 0);
        assert_eq!(
            c2f_result_stage(result, 1, &mut stage, &mut patches, &mut replaced),
            C2fStatus::Ok
        );
        assert_eq!((stage, patches), (2, 16));
        assert!(replaced <= patches);
        assert_eq!(
            c2f_result_stage(result, 5, &mut stage, &mut patches, &mut replaced),
            C2fStatus::InvalidArgument
        );

        let mut restored = ptr::null_mut();
        assert_eq!(c2f_result_restored(result, &mut restored), C2fStatus::Ok);
        let mut out_dims = [0usize; 3];
        assert_eq!(
            c2f_tensor_dims(restored, out_dims.as_mut_ptr(), 3),
            C2fStatus::Ok
        );
        assert_eq!(out_dims, dims);
        let (mut p, mut r) = (0.0, 0.0);
        assert_eq!(c2f_psnr(restored, truth, &mut p), C2fStatus::Ok);
        assert_eq!(c2f_rse(restored, truth, &mut r), C2fStatus::Ok);
        assert!(p > 15.0 && r < 0.2, "psnr {p} rse {r}");

        let mut coarse = ptr::null_mut();
        assert_eq!(c2f_complete(y, mask, plan, &mut coarse), C2fStatus::Ok);
        assert_eq!(c2f_tensor_len(coarse), 24 * 24 * 3);

        let mut values = vec![0.0; 24 * 24 * 3];
        assert_eq!(
            c2f_tensor_data(restored, values.as_mut_ptr(), values.len()),
            C2fStatus::Ok
        );
        assert_eq!(
            c2f_tensor_data(restored, values.as_mut_ptr(), 10),
            C2fStatus::InvalidArgument
        );

        c2f_tensor_free(coarse);
        c2f_tensor_free(restored);
        c2f_result_free(result);
        c2f_plan_free(plan);
        c2f_tensor_free(y);
        c2f_mask_free(mask);
        c2f_tensor_free(truth);
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let t = image(8, 6);
        let png = CString::new(dir.path().join("a.png").to_str().unwrap()).unwrap();
        assert_eq!(c2f_image_save(t, png.as_ptr()), C2fStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(c2f_image_load(png.as_ptr(), &mut back), C2fStatus::Ok);
        assert_eq!(c2f_tensor_ndims(back), 3);

        let observed: Vec<u8> = (0..8 * 6 * 3).map(|i| u8::from(i % 3 != 0)).collect();
        let dims = [8usize, 6, 3];
        let mut m = ptr::null_mut();
        assert_eq!(
            c2f_mask_from_indicator(dims.as_ptr(), 3, observed.as_ptr(), observed.len(), &mut m),
            C2fStatus::Ok
        );
        let path = CString::new(dir.path().join("m.c2fm").to_str().unwrap()).unwrap();
        assert_eq!(c2f_mask_save(m, 1, 0.33, path.as_ptr()), C2fStatus::Ok);
        let mut m2 = ptr::null_mut();
        assert_eq!(c2f_mask_load(path.as_ptr(), &mut m2), C2fStatus::Ok);
        assert_eq!(c2f_mask_observed_count(m2), 96);

        let missing = CString::new("/nonexistent/x.png").unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(c2f_image_load(missing.as_ptr(), &mut none), C2fStatus::Io);
        assert!(none.is_null());
        assert!(!last_error().is_empty());

        c2f_mask_free(m2);
        c2f_mask_free(m);
        c2f_tensor_free(back);
        c2f_tensor_free(t);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(
            c2f_tensor_new(ptr::null(), 2, ptr::null(), 4, &mut t),
            C2fStatus::NullPointer
        );
        assert!(last_error().contains("null"));

        let dims = [2usize, 2];
        let data = [1.0; 3];
        assert_eq!(
            c2f_tensor_new(dims.as_ptr(), 2, data.as_ptr(), 3, &mut t),
            C2fStatus::ShapeMismatch
        );
        assert!(last_error().contains("does not match"));

        let mut m = ptr::null_mut();
        assert_eq!(
            c2f_mask_generate(dims.as_ptr(), 2, 1.5, 0, false, &mut m),
            C2fStatus::InvalidArgument
        );

        let mut plan = ptr::null_mut();
        assert_eq!(c2f_plan_new(C2fSolver::Tv2, 2, &mut plan), C2fStatus::Ok);
        assert!(last_error().is_empty());
        let bad = CString::new("lambda1 = \"x\"").unwrap();
        assert_eq!(
            c2f_plan_set_config_toml(plan, bad.as_ptr()),
            C2fStatus::InvalidArgument
        );
        assert_eq!(
            c2f_plan_set_overlap(plan, ptr::null(), 0),
            C2fStatus::InvalidArgument
        );
        assert_eq!(c2f_plan_set_schedule(plan, 3, 0.15, 0.5), C2fStatus::Ok);

        let full = [1u8; 4];
        let data = [0.5; 4];
        let mut y = ptr::null_mut();
        assert_eq!(
            c2f_tensor_new(dims.as_ptr(), 2, data.as_ptr(), 4, &mut y),
            C2fStatus::Ok
        );
        assert_eq!(
            c2f_mask_from_indicator(dims.as_ptr(), 2, full.as_ptr(), 4, &mut m),
            C2fStatus::Ok
        );
        let mut result = ptr::null_mut();
        // mu below one is rejected when the plan runs
        assert_eq!(c2f_run(y, m, plan, &mut result), C2fStatus::InvalidArgument);
        assert!(result.is_null());
        assert_eq!(
            c2f_run(y, m, ptr::null(), &mut result),
            C2fStatus::NullPointer
        );

        assert_eq!(c2f_tensor_ndims(ptr::null()), 0);
        assert_eq!(c2f_result_stage_count(ptr::null()), 0);
        c2f_tensor_free(ptr::null_mut());
        c2f_plan_free(plan);
        c2f_mask_free(m);
        c2f_tensor_free(y);
    }
}

#[test]
fn truncated_error_buffer() {
    unsafe {
        let mut t = ptr::null_mut();
        c2f_tensor_new(ptr::null(), 1, ptr::null(), 1, &mut t);
        let full = c2f_last_error(ptr::null_mut(), 0);
        assert!(full > 4);
        let mut buf = [1 as c_char; 4];
        assert_eq!(c2f_last_error(buf.as_mut_ptr(), 4), full);
        assert_eq!(buf[3], 0);
    }
}
