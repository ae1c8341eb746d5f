use wavepose_core::net::{train, Net, NetConfig, TrainConfig};
use wavepose_core::skeleton::SkeletonFrame;
use wavepose_core::tensor::Tensor3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let cfg = NetConfig {
        input_t: 8, input_k: 8, input_c: 2,
        encoder_widths: [4, 4, 4], latent: (2, 2, 4),
        decoder_widths: [4, 4, 4, 4, 4, 4],
        out_h: 8, out_w: 8, n_joints: 3, heatmap_sigma_px: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data: Vec<(Tensor3, SkeletonFrame)> = (0..12).map(|_| {
        let x = Tensor3::from_vec(8, 8, 2, (0..128).map(|_| rng.random_range(-1.0..1.0)).collect());
        let kps = vec![
            [rng.random_range(2.0..6.0), rng.random_range(2.0..6.0)],
            [rng.random_range(2.0..6.0), rng.random_range(2.0..6.0)],
            [rng.random_range(2.0..6.0), rng.random_range(2.0..6.0)],
        ];
        (x, SkeletonFrame::from_keypoints(kps, 8, 8, 1.0))
    }).collect();
    let mut net = Net::new(&cfg, 4).unwrap();
    let tc = TrainConfig { epochs: 200, batch_size: 4, seed: 1, ..TrainConfig::default() };
    let m = train(&mut net, &data, None, &tc).unwrap();
    for (i, e) in m.iter().enumerate() {
        if i % 10 == 0 || i == m.len() - 1 {
            println!("epoch {:3}  loss {:.4}  joint {:.3}", e.epoch, e.train_loss, e.train_joint_err_px);
        }
    }
}
