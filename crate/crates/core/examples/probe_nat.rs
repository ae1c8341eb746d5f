use wavepose_core::aigc::{stub_generate, GenerationRequest};
use wavepose_core::metrics::{naturalness_score, reference_corpus, total_variation, RefStats};
use wavepose_core::skeleton::{body_to_pixel, render_skeleton, BONES};
use wavepose_core::synth::REST_POSE;
use wavepose_core::vec2::Vec2;

fn main() {
    let corpus = reference_corpus(40, 1234);
    let stats = RefStats::fit(&corpus).unwrap();
    let kps: Vec<[f64; 2]> = REST_POSE.iter().map(|&(x, y)| body_to_pixel(Vec2::new(x, y), 64, 64)).collect();
    let skel = render_skeleton(&kps, 64, 64, &BONES);
    for steps in [5u32, 8, 12, 18, 22, 27, 32, 37, 42] {
        let req = GenerationRequest {
            skeleton_image: skel.clone(),
            instruction: "boxer".into(),
            steps,
            text_guidance: 7.5,
            image_guidance: 1.5,
            timeout_s: 5.0,
        };
        let img = stub_generate(&req, 7).unwrap();
        println!(
            "steps {steps:2}  sigma {:.4}  tv {:.4}  nat {:.2}",
            6.0 / steps as f64,
            total_variation(&img).unwrap(),
            naturalness_score(&img, &stats).unwrap()
        );
    }
}
