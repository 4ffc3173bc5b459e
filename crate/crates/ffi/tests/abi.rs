use std::ffi::{CStr, CString};
use std::ptr;

use advexp::env::{env_spec, EnvId};
use advexp::inverse::{InverseArch, InverseModel};
use advexp::rng::{stream, Stream};
use advexp_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(adv_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn new_env(name: &str, seed: u64) -> *mut AdvEnv {
    let name = CString::new(name).unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { adv_env_new(name.as_ptr(), seed, &mut env) }, AdvStatus::Ok);
    env
}

#[test]
fn env_round_trip_matches_the_library() {
    let env = new_env("point_reach", 3);
    unsafe {
        assert_eq!(adv_env_state_dim(env), 6);
        assert_eq!(adv_env_action_dim(env), 2);
        assert_eq!(adv_env_horizon(env), 50);
        let mut s = [0.0; 6];
        assert_eq!(adv_env_state(env, s.as_mut_ptr(), 6), AdvStatus::Ok);

        let lib = advexp::env::Env::new(EnvId::PointReach);
        let mut want = lib.state_from_vector(&s).unwrap();
        let a = [0.5, -2.0];
        let mut done = true;
        for _ in 0..50 {
            assert_eq!(
                adv_env_step(env, a.as_ptr(), 2, s.as_mut_ptr(), 6, &mut done),
                AdvStatus::Ok
            );
            want = lib.step(&want, &a).unwrap();
            assert_eq!(s.to_vec(), want.vector);
        }
        assert!(done);
        assert_eq!(
            adv_env_step(env, a.as_ptr(), 2, s.as_mut_ptr(), 6, ptr::null_mut()),
            AdvStatus::PastHorizon
        );
        assert!(last_error().contains("horizon"));

        let mut d = -1.0;
        assert_eq!(adv_env_goal_distance(env, &mut d), AdvStatus::Ok);
        assert!((d - lib.goal_distance(&want)).abs() < 1e-15);
        assert_eq!(adv_env_reset(env, s.as_mut_ptr(), 6), AdvStatus::Ok);
        assert_eq!(last_error(), "");
        adv_env_free(env);
    }
}

#[test]
fn bad_arguments_report_codes() {
    let name = CString::new("swimmer").unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(
        unsafe { adv_env_new(name.as_ptr(), 0, &mut env) },
        AdvStatus::InvalidArgument
    );
    assert!(env.is_null());
    assert!(last_error().contains("swimmer"));

    let env = new_env("push_block", 0);
    let mut s = [0.0; 6];
    let a = [0.0; 3];
    unsafe {
        assert_eq!(
            adv_env_step(env, a.as_ptr(), 3, s.as_mut_ptr(), 6, ptr::null_mut()),
            AdvStatus::Shape
        );
        assert_eq!(adv_env_reset(env, s.as_mut_ptr(), 5), AdvStatus::Shape);
        assert_eq!(
            adv_env_step(env, ptr::null(), 2, s.as_mut_ptr(), 6, ptr::null_mut()),
            AdvStatus::NullPointer
        );
        adv_env_free(env);
        adv_env_free(ptr::null_mut());
    }
}

#[test]
fn model_handle_predicts_like_the_library() {
    let spec = env_spec(EnvId::PushBlock);
    let model = InverseModel::new(
        InverseArch::new(spec.state_dim, spec.action_dim, 8, 8),
        &mut stream(1, Stream::InverseInit),
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    model.save_file(&path).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();

    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { adv_model_load(cpath.as_ptr(), &mut handle) }, AdvStatus::Ok);
    let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
    let xn = [0.15, 0.2, 0.3, 0.4, 0.5, 0.6];
    let mut reference = model.clone();
    let mut out = [0.0; 2];
    for _ in 0..3 {
        let want = reference.predict(&x, &xn).unwrap();
        assert_eq!(
            unsafe { adv_model_predict(handle, x.as_ptr(), xn.as_ptr(), 6, out.as_mut_ptr(), 2) },
            AdvStatus::Ok
        );
        assert_eq!(out.to_vec(), want);
    }
    reference.reset_episode();
    unsafe { adv_model_reset(handle) };
    unsafe { adv_model_predict(handle, x.as_ptr(), xn.as_ptr(), 6, out.as_mut_ptr(), 2) };
    assert_eq!(out.to_vec(), reference.predict(&x, &xn).unwrap());
    unsafe { adv_model_free(handle) };

    let missing = CString::new(dir.path().join("nope").to_str().unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { adv_model_load(missing.as_ptr(), &mut h) }, AdvStatus::Io);
}

#[test]
fn shape_reward_is_exposed() {
    assert_eq!(adv_shape_reward(1.5, 1.5), 0.0);
    assert_eq!(adv_shape_reward(0.5, 1.5), -1.0);
}

#[test]
fn trial_runs_from_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"env":"point_reach","collector":{"kind":"random"},"seed":2,"iterations":2,
        "inverse":{"hidden":8,"recurrent":8},"eval":{"every_samples":500,"n_eval":5,"demo_episodes":10}}"#;
    let config = CString::new(config).unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut success = -1.0;
    assert_eq!(
        unsafe { adv_run_trial_json(config.as_ptr(), out.as_ptr(), &mut success) },
        AdvStatus::Ok
    );
    assert!((0.0..=1.0).contains(&success));
    let curve = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4);

    let bad = CString::new("{not json").unwrap();
    assert_eq!(
        unsafe { adv_run_trial_json(bad.as_ptr(), out.as_ptr(), ptr::null_mut()) },
        AdvStatus::Format
    );
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/advexp.h")).unwrap();
    for f in [
        "adv_last_error",
        "adv_shape_reward",
        "adv_env_new",
        "adv_env_free",
        "adv_env_reset",
        "adv_env_step",
        "adv_env_state",
        "adv_env_goal_distance",
        "adv_model_load",
        "adv_model_predict",
        "adv_model_reset",
        "adv_model_free",
        "adv_run_trial_json",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct AdvEnv AdvEnv;"));
}
