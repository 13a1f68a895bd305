use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use somno::checkpoint::save_stage;
use somno::experience::{save_experience, synthetic_corpus, train_experience, CorpusParams, ExperienceTrainConfig};
use somno::stage::{train, StageLabel, TrainConfig};
use somno::synthetic::staging_set;
use somno_ffi::*;

const HEADER: &str = include_str!("../include/somno.h");

fn last_error() -> String {
    unsafe { CStr::from_ptr(somno_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn header_declares_the_surface() {
    for name in [
        "typedef struct SomnoStageNet SomnoStageNet;",
        "typedef struct SomnoExperienceNet SomnoExperienceNet;",
        "typedef struct SomnoSession SomnoSession;",
        "SOMNO_STATUS_OK = 0",
        "SOMNO_STATUS_BUFFER_TOO_SMALL",
        "somno_last_error(void)",
        "somno_decimate(",
        "somno_band_powers(",
        "somno_stage_net_load(",
        "somno_stage_net_free(",
        "somno_experience_net_predict(",
        "somno_frame_encode(",
        "somno_frame_decode(",
        "somno_stim_write_wav(",
        "somno_metrics(",
        "somno_session_new(",
        "somno_session_report_json(",
    ] {
        assert!(HEADER.contains(name), "header lacks {name}");
    }
    assert!(HEADER.contains("#ifndef SOMNO_H"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(dir) = tempfile::tempdir() else { return };
    let src = dir.path().join("t.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ SomnoSession *s = 0; somno_session_free(s); return (int)SOMNO_STATUS_OK; }}\n",
            concat!(env!("CARGO_MANIFEST_DIR"), "/include/somno.h")
        ),
    )
    .unwrap();
    match Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg(&src).status() {
        Ok(st) => assert!(st.success(), "C compiler rejected somno.h"),
        Err(_) => eprintln!("no C compiler; skipped"),
    }
}

#[test]
fn frame_roundtrip_and_crc() {
    let samples: Vec<f32> = (0..6).map(|i| i as f32 * 0.5 - 1.0).collect();
    let mut buf = vec![0u8; 256];
    let mut len = 0;
    let st = unsafe { somno_frame_encode(7, 7000, 2, 3, samples.as_ptr(), buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(st, SomnoStatus::Ok);
    buf.truncate(len);

    let (mut seq, mut t0, mut nc, mut ns, mut got_len, mut used) = (0u64, 0u64, 0u16, 0u32, 0usize, 0usize);
    let mut out = [0f32; 6];
    let st = unsafe {
        somno_frame_decode(
            buf.as_ptr(),
            buf.len(),
            &mut seq,
            &mut t0,
            &mut nc,
            &mut ns,
            out.as_mut_ptr(),
            out.len(),
            &mut got_len,
            &mut used,
        )
    };
    assert_eq!(st, SomnoStatus::Ok, "{}", last_error());
    assert_eq!((seq, t0, nc, ns, got_len, used), (7, 7000, 2, 3, 6, len));
    assert_eq!(out.to_vec(), samples);

    let mut decode = |b: &[u8]| unsafe {
        somno_frame_decode(
            b.as_ptr(),
            b.len(),
            &mut seq,
            &mut t0,
            &mut nc,
            &mut ns,
            out.as_mut_ptr(),
            out.len(),
            &mut got_len,
            &mut used,
        )
    };
    assert_eq!(decode(&buf[..len - 1]), SomnoStatus::Incomplete);
    let mut bad = buf.clone();
    bad[12] ^= 0x40;
    assert_eq!(decode(&bad), SomnoStatus::Format);
    assert!(last_error().contains("CRC"));
}

#[test]
fn metrics_and_band_powers() {
    let (mut acc, mut f1) = (0.0, 0.0);
    let labels = [1u8, 1, 0, 0, 0];
    let preds = [1u8, 1, 1, 0, 0];
    assert_eq!(unsafe { somno_metrics(preds.as_ptr(), labels.as_ptr(), 5, &mut acc, &mut f1) }, SomnoStatus::Ok);
    assert!((acc - 0.8).abs() < 1e-15 && (f1 - 0.8).abs() < 1e-12);
    let bad = [2u8; 5];
    assert_eq!(
        unsafe { somno_metrics(bad.as_ptr(), labels.as_ptr(), 5, &mut acc, &mut f1) },
        SomnoStatus::InvalidArgument
    );

    let epoch: Vec<f64> = (0..3000).map(|i| (2.0 * std::f64::consts::PI * 2.0 * i as f64 / 100.0).sin()).collect();
    let mut feats = [0.0; 6];
    assert_eq!(unsafe { somno_band_powers(epoch.as_ptr(), epoch.len(), feats.as_mut_ptr()) }, SomnoStatus::Ok);
    assert!(feats[0] > 0.99, "delta share {}", feats[0]);
    assert_eq!(
        unsafe { somno_band_powers(epoch.as_ptr(), 2999, feats.as_mut_ptr()) },
        SomnoStatus::InvalidArgument
    );
}

#[test]
fn wav_written_through_abi() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("bb.wav").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { somno_stim_write_wav(2, 1.0, 0, -6.0, path.as_ptr()) }, SomnoStatus::Ok);
    let bytes = std::fs::read(dir.path().join("bb.wav")).unwrap();
    assert_eq!(&bytes[..4], b"RIFF");
    assert_eq!(unsafe { somno_stim_write_wav(9, 1.0, 0, -6.0, path.as_ptr()) }, SomnoStatus::InvalidArgument);
    assert_eq!(unsafe { somno_stim_write_wav(2, 1.0, 0, 3.0, path.as_ptr()) }, SomnoStatus::InvalidArgument);
}

const ANSWERS: &str = include_str!("../../core/data/answers_example.txt");

#[test]
fn session_lifecycle_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let stage_path = dir.path().join("stage.ckpt");
    let exp_path = dir.path().join("exp.ckpt");
    let cfg = TrainConfig::synthetic(3);
    let (net, _) = train(&staging_set(40, 3).unwrap(), &cfg).unwrap();
    save_stage(&net, &cfg, &stage_path).unwrap();
    let ecfg = ExperienceTrainConfig::synthetic(3);
    let corpus = synthetic_corpus(&CorpusParams {
        seed: 3,
        per_subject: 40,
        ..CorpusParams::default()
    });
    let (enet, _) = train_experience(&corpus, &ecfg).unwrap();
    save_experience(&enet, &ecfg, &exp_path).unwrap();

    let cstr = |p: &std::path::Path| CString::new(p.to_str().unwrap()).unwrap();
    let mut stage = ptr::null_mut();
    let mut exp = ptr::null_mut();
    unsafe {
        assert_eq!(somno_stage_net_load(cstr(&stage_path).as_ptr(), &mut stage), SomnoStatus::Ok);
        assert_eq!(somno_experience_net_load(cstr(&exp_path).as_ptr(), &mut exp), SomnoStatus::Ok);
        let mut wrong = ptr::null_mut();
        assert_eq!(somno_stage_net_load(cstr(&exp_path).as_ptr(), &mut wrong), SomnoStatus::Format);
        assert!(wrong.is_null());
    }

    let answers = CString::new(ANSWERS).unwrap();
    let mut session = ptr::null_mut();
    let st = unsafe { somno_session_new(stage, exp, answers.as_ptr(), ptr::null(), 0, 2, -40.0, &mut session) };
    assert_eq!(st, SomnoStatus::Ok, "{}", last_error());
    unsafe {
        somno_stage_net_free(stage);
        somno_experience_net_free(exp);
    }

    let mut kind = 99;
    assert_eq!(unsafe { somno_session_stimulus(session, &mut kind) }, SomnoStatus::Ok);
    assert_eq!(kind, 0, "forced sham");

    let mut buf = vec![0u8; 4096];
    let mut len = 0;
    assert_eq!(
        unsafe { somno_session_report_json(session, buf.as_mut_ptr().cast(), buf.len(), &mut len) },
        SomnoStatus::WrongPhase
    );

    let script = [StageLabel::W, StageLabel::W, StageLabel::N, StageLabel::N];
    for i in 0..20 {
        let s = script.get(i).copied().unwrap_or(StageLabel::N);
        assert_eq!(unsafe { somno_session_push_stage(session, s.index() as u8) }, SomnoStatus::Ok);
        let mut stop = 0;
        unsafe { somno_session_stop_epoch(session, &mut stop) };
        assert_eq!(stop, if i >= 3 { 3 } else { -1 });
    }
    let mut phase = SomnoPhase::Intake;
    unsafe { somno_session_phase(session, &mut phase) };
    assert_eq!(phase, SomnoPhase::Finalized);
    assert_eq!(unsafe { somno_session_push_stage(session, 1) }, SomnoStatus::WrongPhase);

    assert_eq!(
        unsafe { somno_session_report_json(session, buf.as_mut_ptr().cast(), 4, &mut len) },
        SomnoStatus::BufferTooSmall
    );
    assert_eq!(
        unsafe { somno_session_report_json(session, buf.as_mut_ptr().cast(), buf.len(), &mut len) },
        SomnoStatus::Ok
    );
    let json = CStr::from_bytes_with_nul(&buf[..len]).unwrap().to_str().unwrap();
    assert!(json.contains("\"stages\": \"WWNNNNNNNNNNNNNNNNNN\""), "{json}");
    assert!(json.contains("\"stop_epoch\": 3"));
    unsafe { somno_session_free(session) };
}
