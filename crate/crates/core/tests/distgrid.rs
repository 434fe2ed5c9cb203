mod common;

use std::thread;
use std::time::Duration;

use common::{on_world, rel_inf};
use gwas_gls::datagen::{normal_matrix, spd_matrix};
use gwas_gls::distgrid::{
    dist_cholesky, dist_trsolve, gather_matrix, global_1d, global_2d, owner_1d, owner_2d,
    redist_1d_to_2d, redist_2d_to_1d, replicate, scatter_matrix, DistMatrix1D, DistMatrix2D,
    GridLayout, SocketTransport, Transport,
};
use gwas_gls::kernel::{cholesky_in_place, trsolve_lower, CholeskyFactor, Matrix};
use proptest::prelude::*;

fn distribute<T: Transport>(m: &Matrix, grid: GridLayout, t: &T) -> DistMatrix2D {
    scatter_matrix((t.rank() == 0).then_some(m), grid, t).unwrap()
}

#[test]
fn identity_on_a_square_grid() {
    let eye = Matrix::identity(4);
    let locals = on_world(4, |t, grid| {
        assert_eq!((grid.rows(), grid.cols()), (2, 2));
        distribute(&eye, grid, t).local().clone()
    });
    for (rank, local) in locals.iter().enumerate() {
        assert_eq!((local.rows(), local.cols()), (2, 2));
        let diag = rank == 0 || rank == 3;
        for i in 0..2 {
            for j in 0..2 {
                let expect = if diag && i == j { 1.0 } else { 0.0 };
                assert_eq!(local.get(i, j), expect, "rank {rank} ({i},{j})");
            }
        }
    }
}

#[test]
fn ring_exchange() {
    let got = on_world(4, |t, _| {
        let np = t.size();
        let me = t.rank();
        t.send((me + 1) % np, vec![me as u8]).unwrap();
        t.recv((me + np - 1) % np).unwrap()
    });
    for (rank, bytes) in got.iter().enumerate() {
        assert_eq!(bytes, &vec![((rank + 3) % 4) as u8]);
    }
}

#[test]
fn single_rank_alltoall_is_identity() {
    let got = on_world(1, |t, _| t.alltoall(vec![vec![1, 2, 3]]).unwrap());
    assert_eq!(got, vec![vec![vec![1, 2, 3]]]);
}

#[test]
fn broadcast_reaches_every_rank() {
    let payload: Vec<u8> = (10..18).collect();
    let got = on_world(3, |t, _| {
        let mine = if t.rank() == 0 {
            payload.clone()
        } else {
            Vec::new()
        };
        t.broadcast(0, mine).unwrap()
    });
    assert!(got.iter().all(|b| b == &payload));
}

#[test]
fn cholesky_of_identity_is_identity() {
    let eye = Matrix::identity(16);
    let got = on_world(4, |t, grid| {
        let l = dist_cholesky(distribute(&eye, grid, t), t, 4).unwrap();
        gather_matrix(&l, t).unwrap()
    });
    assert_eq!(got[0].as_ref().unwrap(), &eye);
}

#[test]
fn identity_factor_leaves_rhs_unchanged() {
    let b = normal_matrix(12, 5, 9);
    let got = on_world(6, |t, grid| {
        let l = distribute(&Matrix::identity(12), grid, t);
        let x = dist_trsolve(&l, &distribute(&b, grid, t), t, 4).unwrap();
        replicate(&x, t).unwrap()
    });
    assert!(got.iter().all(|x| x == &b));
}

#[test]
fn factor_matches_single_process() {
    let m = spd_matrix(96, 42);
    let reference = CholeskyFactor::factor(m.clone()).unwrap();
    let got = on_world(6, |t, grid| {
        assert_eq!((grid.rows(), grid.cols()), (2, 3));
        let l = dist_cholesky(distribute(m.as_matrix(), grid, t), t, 16).unwrap();
        gather_matrix(&l, t).unwrap()
    });
    let l = got[0].as_ref().unwrap();
    assert!(rel_inf(l.as_slice(), reference.as_matrix().as_slice()) <= 1e-10);
}

#[test]
fn many_right_hand_sides() {
    let m = spd_matrix(96, 7);
    let l = CholeskyFactor::factor(m).unwrap();
    let b = normal_matrix(96, 64, 8);
    let got = on_world(4, |t, grid| {
        let dl = distribute(l.as_matrix(), grid, t);
        let x = dist_trsolve(&dl, &distribute(&b, grid, t), t, 16).unwrap();
        gather_matrix(&x, t).unwrap()
    });
    let x = got[0].as_ref().unwrap();
    let back = l.as_matrix().matmul(x).unwrap();
    assert!(rel_inf(back.as_slice(), b.as_slice()) <= 1e-12);
    assert_eq!(x, &trsolve_lower(&l, &b).unwrap());
}

#[test]
fn indefinite_input_fails_on_every_rank() {
    let mut a = Matrix::identity(10);
    a.set(6, 6, -2.0);
    let got = on_world(4, |t, grid| {
        dist_cholesky(distribute(&a, grid, t), t, 3).map(|_| ())
    });
    for r in got {
        assert!(
            matches!(
                r,
                Err(gwas_gls::GlsError::NotPositiveDefinite { pivot_index: 6 })
            ),
            "{r:?}"
        );
    }
}

#[test]
fn socket_world_matches_inproc() {
    let m = spd_matrix(40, 3);
    let b = normal_matrix(40, 11, 4);
    let np = 4;
    let grid = GridLayout::new(np).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = |t: &dyn Transport| {
        let l = dist_cholesky(
            scatter_matrix((t.rank() == 0).then_some(m.as_matrix()), grid, t).unwrap(),
            t,
            8,
        )
        .unwrap();
        let rhs = scatter_matrix((t.rank() == 0).then_some(&b), grid, t).unwrap();
        let x = dist_trsolve(&l, &rhs, t, 8).unwrap();
        (replicate(&l, t).unwrap(), replicate(&x, t).unwrap())
    };
    let socket: Vec<_> = thread::scope(|s| {
        let handles: Vec<_> = (0..np)
            .map(|r| {
                let dir = dir.path();
                let run = &run;
                s.spawn(move || {
                    let t = SocketTransport::connect(r, np, dir, Duration::from_secs(20)).unwrap();
                    run(&t)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let inproc = on_world(np, |t, _| run(t));
    assert_eq!(socket, inproc);

    let mut l = m.into_matrix();
    cholesky_in_place(&mut l, 8).unwrap();
    assert_eq!(socket[0].0, l);
}

fn arb_world() -> impl Strategy<Value = GridLayout> {
    (1usize..=8).prop_map(|np| GridLayout::new(np).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scatter_gather_round_trip(rows in 1usize..=64, cols in 1usize..=64, np in 1usize..=8, seed in any::<u64>()) {
        let a = normal_matrix(rows, cols, seed);
        let got = on_world(np, |t, grid| gather_matrix(&distribute(&a, grid, t), t).unwrap());
        prop_assert_eq!(got[0].as_ref(), Some(&a));
        prop_assert!(got[1..].iter().all(Option::is_none));
    }

    #[test]
    fn one_d_two_d_round_trip(rows in 1usize..=64, cols in 0usize..=64, np in 1usize..=8, seed in any::<u64>()) {
        let a = normal_matrix(rows, cols.max(1), seed).columns(0, cols);
        let got = on_world(np, |t, grid| {
            let me = t.rank();
            let mine: Vec<usize> = (0..cols).filter(|&j| owner_1d(j, &grid).0 == me).collect();
            let local = Matrix::from_fn(rows, mine.len(), |i, lc| a.get(i, mine[lc]));
            let one = DistMatrix1D::from_local(rows, cols, grid, me, local.clone()).unwrap();
            let two = redist_1d_to_2d(&one, t).unwrap();
            for li in 0..two.local().rows() {
                for lj in 0..two.local().cols() {
                    let (i, j) = global_2d(me, li, lj, &grid);
                    assert_eq!(two.local().get(li, lj), a.get(i, j));
                }
            }
            let back = redist_2d_to_1d(&two, t).unwrap().into_local();
            back == local
        });
        prop_assert!(got.into_iter().all(|ok| ok));
    }

    #[test]
    fn owner_maps_round_trip(grid in arb_world(), i in 0usize..500, j in 0usize..500) {
        let (rank, li, lj) = owner_2d(i, j, &grid);
        prop_assert!(rank < grid.np());
        prop_assert_eq!(global_2d(rank, li, lj, &grid), (i, j));
        let (rank, lc) = owner_1d(j, &grid);
        prop_assert!(rank < grid.np());
        prop_assert_eq!(global_1d(rank, lc, &grid), j);
    }

    #[test]
    fn local_shapes_tile_the_matrix(grid in arb_world(), rows in 0usize..40, cols in 0usize..40) {
        let total: usize = (0..grid.np())
            .map(|r| {
                let d = DistMatrix2D::zeros(rows, cols, grid, r);
                d.local().rows() * d.local().cols()
            })
            .sum();
        prop_assert_eq!(total, rows * cols);
    }
}
