#include <doctest.h>

#include <cmath>
#include <vector>

#include "chirpsound/channel.hpp"
#include "chirpsound/error.hpp"
#include "chirpsound/estimator.hpp"
#include "chirpsound/rng.hpp"
#include "oracles.hpp"

using namespace chirpsound;

namespace {

CVector random_taps(RandomStream& rng, int L)
{
    CVector h(L);
    for (int l = 0; l < L; ++l) {
        h[l] = rng.complex_normal(0.5);
    }
    return h;
}

}  // namespace

TEST_CASE("sounding matrix Gram blocks")
{
    const std::vector<int> ps{1, 2, 4};
    SUBCASE("integer offsets")
    {
        std::vector<SoundingMatrix> S;
        for (int p : ps) {
            S.push_back(build_sounding_matrix(generate_chirp(p, 128), 15, SoundingKind::integer));
        }
        for (std::size_t i = 0; i < S.size(); ++i) {
            CHECK(S[i].entries.rows() == 128);
            CHECK(S[i].entries.cols() == 15);
            for (std::size_t v = 0; v < S.size(); ++v) {
                const CMatrix gram = S[i].entries.adjoint() * S[v].entries;
                const CMatrix expected = i == v ? CMatrix(CMatrix::Identity(15, 15)) : CMatrix(CMatrix::Zero(15, 15));
                CHECK((gram - expected).cwiseAbs().maxCoeff() < 1e-12);
            }
        }
    }
    SUBCASE("fractional offsets")
    {
        std::vector<SoundingMatrix> S;
        for (int p : ps) {
            S.push_back(build_sounding_matrix(generate_chirp(p, 256), 15, SoundingKind::fractional, 4));
        }
        for (std::size_t i = 0; i < S.size(); ++i) {
            CHECK(S[i].entries.cols() == 22);
            CHECK(S[i].offset == 4);
            for (std::size_t v = 0; v < S.size(); ++v) {
                const CMatrix gram = S[i].entries.adjoint() * S[v].entries;
                const CMatrix expected = i == v ? CMatrix(CMatrix::Identity(22, 22)) : CMatrix(CMatrix::Zero(22, 22));
                CHECK((gram - expected).cwiseAbs().maxCoeff() < 1e-12);
            }
        }
    }
    SUBCASE("entries follow the cyclic Toeplitz rule")
    {
        const auto w = generate_chirp(2, 32);
        const auto S = build_sounding_matrix(w, 3, SoundingKind::fractional, 2);
        for (int r = 0; r < 32; ++r) {
            for (int c = 0; c < S.entries.cols(); ++c) {
                CHECK(S.entries(r, c) == w.samples[((2 + r - c) % 32 + 32) % 32]);
            }
        }
    }
    SUBCASE("single tap")
    {
        const auto w = generate_chirp(1, 8);
        const auto S = build_sounding_matrix(w, 1, SoundingKind::integer);
        CHECK(S.entries.cols() == 1);
        CHECK((S.entries.col(0) - w.samples).norm() == 0.0);
    }
    SUBCASE("dimension errors")
    {
        const auto w = generate_chirp(1, 8);
        CHECK_THROWS_AS(build_sounding_matrix(w, 0, SoundingKind::integer), DimensionError);
        CHECK_THROWS_AS(build_sounding_matrix(w, 9, SoundingKind::integer), DimensionError);
        CHECK_THROWS_AS(build_sounding_matrix(w, 3, SoundingKind::fractional, 0), DimensionError);
        CHECK_THROWS_AS(build_sounding_matrix(w, 3, SoundingKind::fractional, 4), DimensionError);
        CHECK_THROWS_AS(build_sounding_matrix(w, 3, SoundingKind::full), DimensionError);
        const auto S = build_sounding_matrix(w, 3, SoundingKind::integer);
        CHECK_THROWS_AS(matched_filter_integer(S, CVector::Zero(7)), DimensionError);
        CHECK_THROWS_AS(matched_filter_fractional(S, CVector::Zero(8)), DimensionError);
    }
}

TEST_CASE("integer matched filter recovers each link exactly without noise")
{
    ScenarioConfig cfg = preset("paper-sec5");
    std::vector<SoundingWaveform> w;
    for (int p : cfg.p) {
        w.push_back(generate_chirp(p, cfg.N));
    }
    RandomStream rng(42, 0, StreamId::channel_taps);
    const MimoScenario s = synthesize_channels(cfg, rng);
    const auto r = noiseless_integer(s, w);
    for (int i = 0; i < 3; ++i) {
        const auto S = build_sounding_matrix(w[i], cfg.L, SoundingKind::integer);
        for (int m = 0; m < 3; ++m) {
            const CVector est = matched_filter_integer(S, r[m]);
            CHECK((est - s.link(i, m).taps).cwiseAbs().maxCoeff() < 1e-13);
        }
    }

    SUBCASE("no cross-talk from other transmitters")
    {
        MimoScenario only_first = s;
        for (int i = 1; i < 3; ++i) {
            for (int m = 0; m < 3; ++m) {
                only_first.link(i, m).taps.setZero();
            }
        }
        const auto r1 = noiseless_integer(only_first, w);
        for (int i = 1; i < 3; ++i) {
            const auto S = build_sounding_matrix(w[i], cfg.L, SoundingKind::integer);
            CHECK(matched_filter_integer(S, r1[0]).cwiseAbs().maxCoeff() < 1e-13);
        }
    }
}

TEST_CASE("fractional matched filter returns G(mu) h")
{
    ScenarioConfig cfg = preset("paper-sec5-fractional");
    const auto pulse = build_pulse(cfg.pulse_kind, cfg.rolloff, cfg.M);
    std::vector<SoundingWaveform> w;
    for (int p : cfg.p) {
        w.push_back(generate_chirp(p, cfg.N));
    }
    RandomStream rng(8, 0, StreamId::channel_taps);
    const MimoScenario s = synthesize_channels(cfg, rng);
    const auto r = noiseless_fractional(s, w, pulse);
    for (int i = 0; i < 3; ++i) {
        const auto S = build_sounding_matrix(w[i], cfg.L, SoundingKind::fractional, cfg.M);
        for (int m = 0; m < 3; ++m) {
            const LinkChannel& link = s.link(i, m);
            const CVector hF = matched_filter_fractional(S, r[m]);
            const CVector expected = oracle::shaping(link.mu, cfg.L, cfg.M, cfg.rolloff).cast<cplx>() * link.taps;
            CHECK((hF - expected).cwiseAbs().maxCoeff() < 1e-12);
        }
    }

    SUBCASE("zero offset embeds h between M zeros on each side")
    {
        MimoScenario flat = s;
        for (auto& link : flat.links) {
            link.mu = 0.0;
        }
        const auto r0 = noiseless_fractional(flat, w, pulse);
        const auto S = build_sounding_matrix(w[1], cfg.L, SoundingKind::fractional, cfg.M);
        const CVector hF = matched_filter_fractional(S, r0[2]);
        CHECK(hF.head(cfg.M).cwiseAbs().maxCoeff() < 1e-13);
        CHECK(hF.tail(cfg.M - 1).cwiseAbs().maxCoeff() < 1e-13);
        CHECK((hF.segment(cfg.M, cfg.L) - flat.link(1, 2).taps).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("shaping matrix")
{
    const auto pulse = build_pulse(PulseKind::raised_cosine, 0.25, 4);

    SUBCASE("zero offset is a shifted identity")
    {
        const RMatrix G = build_shaping_matrix(pulse, 0.0, 3, 4);
        REQUIRE(G.rows() == 10);
        REQUIRE(G.cols() == 3);
        for (int r = 0; r < 10; ++r) {
            for (int c = 0; c < 3; ++c) {
                CHECK(std::abs(G(r, c) - (r == c + 4 ? 1.0 : 0.0)) < 1e-15);
            }
        }
    }
    SUBCASE("matches the textbook pulse for every entry")
    {
        for (double mu : {0.1, 0.25, 0.5}) {
            const RMatrix G = build_shaping_matrix(pulse, mu, 2, 4);
            CHECK(G.rows() == 9);
            CHECK((G - oracle::shaping(mu, 2, 4, 0.25)).cwiseAbs().maxCoeff() < 1e-14);
            for (int r = 1; r < 9; ++r) {
                CHECK(G(r, 1) == G(r - 1, 0));
            }
        }
    }
    SUBCASE("G^T G is positive definite over the offset range")
    {
        for (double mu = 0.0; mu <= 0.5; mu += 0.01) {
            const RMatrix G = build_shaping_matrix(pulse, mu, 15, 4);
            const Eigen::SelfAdjointEigenSolver<RMatrix> eig(G.transpose() * G);
            CHECK(eig.eigenvalues().minCoeff() > 1e-3);
        }
    }
    SUBCASE("offset outside [0, 1/2] is rejected")
    {
        CHECK_THROWS_AS(build_shaping_matrix(pulse, 0.6, 3, 4), ValidationError);
        CHECK_THROWS_AS(build_shaping_matrix(pulse, -0.01, 3, 4), ValidationError);
    }
}

TEST_CASE("residual derivative agrees with central differences")
{
    const auto pulse = build_pulse(PulseKind::raised_cosine, 0.25, 4);
    RandomStream rng(3, 0, 90u);
    const CVector y = random_taps(rng, 22);
    const CVector h = random_taps(rng, 15);
    for (double mu : {0.05, 0.2, 0.33, 0.45}) {
        const double step = 1e-6;
        const double fd =
            (shaping_residual(y, pulse, mu + step, h, 4) - shaping_residual(y, pulse, mu - step, h, 4)) / (2 * step);
        CHECK(shaping_residual_derivative(y, pulse, mu, h, 4) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("solve_taps")
{
    RandomStream rng(4, 0, 90u);
    RMatrix G = RMatrix::Random(10, 4);
    const CVector h = random_taps(rng, 4);
    const CVector y = G.cast<cplx>() * h;
    CHECK((solve_taps(y, G) - h).norm() < 1e-12);
    CHECK_THROWS_AS(solve_taps(CVector::Zero(9), G), DimensionError);
    G.col(2) = G.col(1);
    CHECK_THROWS_WITH_AS(solve_taps(y, G), doctest::Contains("condition estimate"), NumericalError);
}

TEST_CASE("joint estimator on noiseless data")
{
    const int L = 15;
    const int M = 4;
    const double beta = 0.25;
    const auto pulse = build_pulse(PulseKind::raised_cosine, beta, M);

    for (double mu_true : {0.3, 0.5, 0.0}) {
        RandomStream rng(17, 0, 91u);
        const CVector h = random_taps(rng, L);
        const CVector y = oracle::shaping(mu_true, L, M, beta).cast<cplx>() * h;
        const EstimateReport rep = joint_estimate(y, pulse, L, M);
        INFO("mu_true=" << mu_true);
        REQUIRE(rep.mu_hat.has_value());
        CHECK(rep.converged);
        CHECK(std::abs(*rep.mu_hat - mu_true) < 1e-6);
        CHECK((rep.h_hat - h).norm() < 1e-6);
        CHECK(rep.residual < 1e-20);
        CHECK(rep.raw_output == y);

        const oracle::Fit oracle = oracle::grid_search(y, L, M, beta);
        CHECK(std::abs(oracle.mu - *rep.mu_hat) <= 1e-4);
    }
}

TEST_CASE("joint estimator edge cases")
{
    const auto pulse = build_pulse(PulseKind::raised_cosine, 0.25, 4);

    SUBCASE("zero input leaves the offset undetermined")
    {
        const EstimateReport rep = joint_estimate(CVector::Zero(22), pulse, 15, 4);
        CHECK(rep.h_hat == CVector::Zero(15));
        CHECK_FALSE(rep.mu_hat.has_value());
        CHECK(rep.converged);
    }
    SUBCASE("wrong input length")
    {
        CHECK_THROWS_AS(joint_estimate(CVector::Zero(21), pulse, 15, 4), DimensionError);
        CHECK_THROWS_AS(joint_estimate(CVector::Zero(22), pulse, 0, 4), DimensionError);
    }
    SUBCASE("fixed-taps steps lower the residual but flag slow convergence")
    {
        RandomStream rng(1, 0, 91u);
        const CVector h = random_taps(rng, 15);
        const CVector y = oracle::shaping(0.3, 15, 4, 0.25).cast<cplx>() * h;
        JointOptions opts;
        opts.offset_step = OffsetStep::fixed_taps;
        opts.max_iters = 3;
        const EstimateReport rep = joint_estimate(y, pulse, 15, 4, opts);
        CHECK_FALSE(rep.converged);
        CHECK(rep.iterations == 3);
        const RMatrix G0 = build_shaping_matrix(pulse, opts.mu_init, 15, 4);
        const double start = shaping_residual(y, pulse, opts.mu_init, solve_taps(y, G0), 4);
        CHECK(rep.residual < start);
    }
}

TEST_CASE("joint estimator at 40 dB follows the grid oracle")
{
    const int L = 15;
    const int M = 4;
    const double beta = 0.25;
    const auto pulse = build_pulse(PulseKind::raised_cosine, beta, M);
    int interior = 0;
    for (int trial = 0; trial < 100; ++trial) {
        RandomStream rng(2024, trial, 92u);
        const CVector h = random_taps(rng, L);
        const double mu = 0.5 * rng.uniform();
        CVector y = oracle::shaping(mu, L, M, beta).cast<cplx>() * h;
        // unit tap power on average; 40 dB puts 2 sigma^2 at 1e-4
        for (long k = 0; k < y.size(); ++k) {
            y[k] += rng.complex_normal(0.5e-4);
        }
        const EstimateReport rep = joint_estimate(y, pulse, L, M);
        REQUIRE(rep.mu_hat.has_value());
        CHECK(rep.converged);
        const oracle::Fit oracle = oracle::grid_search(y, L, M, beta);
        INFO("trial=" << trial << " mu=" << mu);
        CHECK(std::abs(oracle.mu - *rep.mu_hat) <= 1e-4);

        const double slope = shaping_residual_derivative(y, pulse, *rep.mu_hat, rep.h_hat, M);
        if (*rep.mu_hat > 0.0 && *rep.mu_hat < 0.5) {
            ++interior;
            CHECK(std::abs(slope) < 1e-6);
        }
    }
    CHECK(interior > 50);
}

TEST_CASE("segmented output")
{
    const int N = 128;
    const int L = 15;
    ScenarioConfig cfg = preset("paper-sec5");
    std::vector<SoundingWaveform> w;
    for (int p : cfg.p) {
        w.push_back(generate_chirp(p, N));
    }

    SUBCASE("noise-free segments alternate in sign")
    {
        RandomStream rng(5, 0, StreamId::channel_taps);
        const MimoScenario s = synthesize_channels(cfg, rng);
        const auto r = noiseless_integer(s, w);
        for (int i = 0; i < 3; ++i) {
            const auto full = build_full_sounding_matrix(w[i], 0);
            const SegmentedOutput out = segmented_output(full, r[1]);
            CHECK(out.segments == 2 * cfg.p[i]);
            CHECK(out.segment_length == N / (2 * cfg.p[i]));
            for (int j = 0; j < out.segments; ++j) {
                CHECK(out.sign(j) == (j % 2 == 0 ? 1 : -1));
                const CVector head = out.segment(j).head(L);
                CHECK((head - out.sign(j) * s.link(i, 1).taps).cwiseAbs().maxCoeff() < 1e-9);
                CHECK(out.segment(j).tail(out.segment_length - L).cwiseAbs().maxCoeff() < 1e-9);
            }
            CHECK((out.sign_corrected_average(L) - s.link(i, 1).taps).cwiseAbs().maxCoeff() < 1e-12);
        }
    }

    SUBCASE("noise at replica lags is fully correlated")
    {
        const double sigma2 = 0.5;
        const auto full = build_full_sounding_matrix(w[2], 0);  // p = 4
        const int half = N / 8;
        cplx at_half{}, at_full{}, at_zero{};
        long count = 0;
        for (int trial = 0; trial < 400; ++trial) {
            RandomStream rng(77, trial, StreamId::noise);
            CVector z(N);
            for (int n = 0; n < N; ++n) {
                z[n] = rng.complex_normal(sigma2);
            }
            const CVector u = full.entries.adjoint() * z;
            for (int k = 0; k < N; ++k) {
                at_zero += u[k] * std::conj(u[k]);
                at_half += u[(k + half) % N] * std::conj(u[k]);
                at_full += u[(k + 2 * half) % N] * std::conj(u[k]);
                ++count;
            }
        }
        CHECK(at_zero.real() / count == doctest::Approx(2.0 * sigma2).epsilon(0.02));
        CHECK(at_half.real() / count == doctest::Approx(-2.0 * sigma2).epsilon(0.02));
        CHECK(at_full.real() / count == doctest::Approx(2.0 * sigma2).epsilon(0.02));
    }

    SUBCASE("dimension check")
    {
        const auto S = build_sounding_matrix(w[0], L, SoundingKind::integer);
        CHECK_THROWS_AS(segmented_output(S, CVector::Zero(N)), DimensionError);
    }
}

TEST_CASE("sign-corrected averaging does not lower the MSE")
{
    const int N = 128;
    const int L = 15;
    const auto w = generate_chirp(4, N);
    const auto full = build_full_sounding_matrix(w, 0);
    const double sigma2 = 0.01;
    double single = 0.0;
    double averaged = 0.0;
    for (int trial = 0; trial < 5000; ++trial) {
        RandomStream rng(31, trial, StreamId::noise);
        CVector z(N);
        for (int n = 0; n < N; ++n) {
            z[n] = rng.complex_normal(sigma2);
        }
        const SegmentedOutput out = segmented_output(full, z);
        single += out.segment(0).head(L).squaredNorm();
        averaged += out.sign_corrected_average(L).squaredNorm();
    }
    single /= 5000;
    averaged /= 5000;
    CHECK(single == doctest::Approx(2.0 * L * sigma2).epsilon(0.03));
    CHECK(std::abs(averaged / single - 1.0) < 0.03);
}
