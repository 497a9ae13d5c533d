#include <catch2/catch.hpp>

#include "cqbound/fim.hpp"
#include "cqbound/oracle.hpp"
#include "cqbound/state_space.hpp"
#include "test_models.hpp"

using namespace cqbound;
using namespace cqtest;

namespace {

MatX random_psd(int n, Rng& rng, double diag_boost = 1.0) {
    MatX a(n, n);
    for (int i = 0; i < n * n; ++i) a(i / n, i % n) = rng.uniform(-1, 1);
    return symmetrize(a * a.transpose() + diag_boost * MatX::Identity(n, n));
}

MatX scalar(double v) {
    MatX m(1, 1);
    m << v;
    return m;
}

}  // namespace

TEST_CASE("schur complement: block diagonal and scalar example") {
    Rng rng(1);
    const MatX c = random_psd(3, rng);
    CHECK(schur_lower_right(MatX::Identity(3, 3), MatX::Zero(3, 3), MatX::Zero(3, 3), c)
              .isApprox(c, 1e-14));
    CHECK(schur_lower_right(scalar(2), scalar(1), scalar(1), scalar(3))(0, 0) == Approx(2.5));
    CHECK_THROWS_AS(schur_lower_right(MatX::Zero(2, 2), MatX::Zero(2, 2), MatX::Zero(2, 2),
                                      MatX::Identity(2, 2)),
                    NumericalError);
}

TEST_CASE("schur complement equals inverse of lower-right block of the full inverse") {
    Rng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const MatX a11 = random_psd(4, rng);
        const MatX a22 = random_psd(4, rng, 3.0);
        MatX a12(4, 4);
        for (int i = 0; i < 16; ++i) a12(i / 4, i % 4) = 0.3 * rng.uniform(-1, 1);
        MatX full(8, 8);
        full << a11, a12, a12.transpose(), a22;

        const MatX schur = schur_lower_right(a11, a12, a12.transpose(), a22);
        const MatX inv_block = full.inverse().bottomRightCorner(4, 4);
        CHECK((schur - inv_block.inverse()).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("transition blocks: linear scalar model") {
    const ScalarTransition model{.a = 1.0, .b = 0.0, .q = 1.0};
    const auto blocks = b_blocks_state(particles_from({-3.0, 0.5, 42.0}), model);
    CHECK(blocks.b11(0, 0) == Approx(1.0));
    CHECK(blocks.b12(0, 0) == Approx(-1.0));
    CHECK(blocks.b22_transition(0, 0) == Approx(1.0));

    // any particle placement gives the same blocks for a linear model
    const auto other = b_blocks_state(particles_from({7.0, 8.0}), model);
    CHECK(other.b11.isApprox(blocks.b11, 1e-14));
    CHECK(other.b12.isApprox(blocks.b12, 1e-14));

    CHECK_THROWS_AS(b_blocks_state(ParticleSet{}, model), ConfigError);
}

TEST_CASE("transition blocks match brute-force score moments on a nonlinear model") {
    const ScalarTransition model{.a = 1.0, .b = 0.1, .q = 1.0};
    const auto particles = particles_from({-0.5, 0.2, 0.9, 1.7});
    const auto blocks = b_blocks_state(particles, model);

    // Monte-Carlo over (x, x'): score w.r.t. x by finite differences of
    // log P(x'|x); Fisher identities give B11 = E[s s] and B12 = -E[s s'].
    Rng rng(2);
    const int n = 1000000;
    const double fd = 1e-5;
    double sum11 = 0, sq11 = 0, sum12 = 0, sq12 = 0;
    auto log_p = [&](double xp, double x) {
        const double mean = x + 0.1 * x * x;
        return -0.5 * (xp - mean) * (xp - mean) / model.q;
    };
    for (int i = 0; i < n; ++i) {
        const double x = particles.states(0, static_cast<int>(rng.bounded(particles.count())));
        const double xp = x + 0.1 * x * x + std::sqrt(model.q) * rng.normal();
        const double s_x = (log_p(xp, x + fd) - log_p(xp, x - fd)) / (2 * fd);
        const double s_xp = (log_p(xp + fd, x) - log_p(xp - fd, x)) / (2 * fd);
        sum11 += s_x * s_x;
        sq11 += s_x * s_x * s_x * s_x;
        sum12 += s_x * s_xp;
        sq12 += s_x * s_x * s_xp * s_xp;
    }
    const double mean11 = sum11 / n, se11 = std::sqrt((sq11 / n - mean11 * mean11) / n);
    const double mean12 = sum12 / n, se12 = std::sqrt((sq12 / n - mean12 * mean12) / n);
    CHECK(std::abs(blocks.b11(0, 0) - mean11) < 3 * se11);
    // cross identity: E{-d^2 log P / dx dx'} = -E[s_x s_x'], so B12 = E[s_x s_x']
    CHECK(std::abs(blocks.b12(0, 0) - mean12) < 3 * se12);
}

TEST_CASE("raw observation information: scalar examples") {
    const auto particles = particles_from({0.0, 1.0, 2.0});
    std::vector<LinearSensor> one{scalar_sensor()};
    CHECK(j_raw(particles, one)(0, 0) == Approx(1.0));

    std::vector<LinearSensor> two{scalar_sensor(), scalar_sensor()};
    CHECK(j_raw(particles, two)(0, 0) == Approx(2.0));
}

TEST_CASE("raw observation information matches Monte-Carlo score variance on bearings") {
    BearingObsModel obs;
    std::vector<BearingSensor> sensors{{{100, 150}, obs}, {{700, 300}, obs}};
    VecX x0(4);
    x0 << 420, 5, 660, -3;
    const MatX j = j_raw(single_particle(x0), sensors);

    Rng rng(3);
    const int n = 1000000;
    MatX sum = MatX::Zero(4, 4);
    MatX sumsq = MatX::Zero(4, 4);
    const double fd = 1e-4;
    for (int i = 0; i < n; ++i) {
        VecX s = VecX::Zero(4);
        for (const auto& sensor : sensors) {
            const double g = sensor.mean(x0);
            const double r = sensor.variance(x0);
            const double z = g + std::sqrt(r) * rng.normal();
            // finite-difference score of the Gaussian log-density (r frozen)
            for (int u = 0; u < 4; ++u) {
                VecX xp = x0, xm = x0;
                xp[u] += fd;
                xm[u] -= fd;
                const double lp = -0.5 * sq(z - sensor.mean(xp)) / r;
                const double lm = -0.5 * sq(z - sensor.mean(xm)) / r;
                s[u] += (lp - lm) / (2 * fd);
            }
        }
        const MatX outer = s * s.transpose();
        sum += outer;
        sumsq += outer.cwiseProduct(outer);
    }
    const MatX mean = sum / n;
    const MatX se = ((sumsq / n - mean.cwiseProduct(mean)).cwiseMax(0.0) / n).cwiseSqrt();
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k)
            CHECK(std::abs(j(i, k) - mean(i, k)) <= 3 * se(i, k) + 1e-12);
}

TEST_CASE("quantized information: 1-bit symmetric case gives 2/pi") {
    const auto spec = QuantizerSpec::uniform(1, -1, 1);
    std::vector<LinearSensor> sensors{scalar_sensor()};
    const MatX j = j_quantized(single_particle(VecX::Zero(1)), sensors, spec);
    CHECK(j(0, 0) == Approx(2.0 / kPi).epsilon(1e-9));
}

TEST_CASE("quantized information never exceeds raw information") {
    BearingObsModel obs;
    std::vector<BearingSensor> sensors{{{100, 150}, obs}, {{900, 800}, obs}, {{300, 1200}, obs}};
    Rng rng(8);
    ParticleSet particles;
    particles.states.resize(4, 50);
    for (int i = 0; i < 50; ++i) {
        particles.states(0, i) = rng.uniform(300, 900);
        particles.states(1, i) = rng.uniform(-5, 5);
        particles.states(2, i) = rng.uniform(300, 900);
        particles.states(3, i) = rng.uniform(-5, 5);
    }
    particles.weights = VecX::Constant(50, 1.0 / 50);

    for (int bits = 1; bits <= 8; ++bits) {
        const auto spec = QuantizerSpec::uniform(bits, -kPi, kPi);
        const MatX gap = j_raw(particles, sensors) - j_quantized(particles, sensors, spec);
        CHECK(psd_up_to(gap, 1e-8 * gap.trace() + 1e-12));
    }
}

TEST_CASE("fine quantization approaches raw information") {
    const double g = 0.3, r = 0.04;
    std::vector<LinearSensor> sensors{scalar_sensor(r)};
    VecX x0(1);
    x0 << g;
    const auto spec = QuantizerSpec::uniform(8, g - 6 * std::sqrt(r), g + 6 * std::sqrt(r));
    const double jq = j_quantized(single_particle(x0), sensors, spec)(0, 0);
    const double jr = j_raw(single_particle(x0), sensors)(0, 0);
    CHECK(jq == Approx(jr).epsilon(0.02));
    CHECK(jq <= jr * (1 + 1e-12));
}

TEST_CASE("quantized information is monotone under nested refinement") {
    const auto particles = single_particle(VecX::Zero(1));
    std::vector<LinearSensor> sensors{scalar_sensor()};
    double prev = 0.0;
    for (int bits = 1; bits <= 8; ++bits) {
        const auto spec = QuantizerSpec::uniform(bits, -4, 4);
        const double jq = j_quantized(particles, sensors, spec)(0, 0);
        CHECK(jq >= prev - 1e-12);
        prev = jq;
    }
}

TEST_CASE("local update: scalar example and predictive ordering") {
    BBlocks blocks{scalar(1), scalar(-1), scalar(1)};
    CHECK(local_fim_update(scalar(1), blocks, scalar(1))(0, 0) == Approx(1.5));

    const MatX pred = predictive_fim_update(scalar(1), blocks);
    CHECK(pred(0, 0) == Approx(0.5));
    CHECK(local_fim_update(scalar(1), blocks, scalar(1))(0, 0) >= pred(0, 0));

    CHECK_THROWS_AS(local_fim_update(scalar(-1), blocks, scalar(1)), NumericalError);
}

TEST_CASE("raw recursion equals the Kalman information filter on a 4-state model") {
    const auto model = ProcessModel::coordinated_turn(0.1, 1.0, [] {
        MatX q(4, 4);
        q << 0.03, 0.05, 0.0, 0.0,
             0.05, 0.10, 0.0, 0.0,
             0.0, 0.0, 0.03, 0.05,
             0.0, 0.0, 0.05, 0.10;
        return q;
    }());

    std::vector<LinearSensor> sensors;
    LinearSensor s1, s2;
    s1.h = VecX::Zero(4);
    s1.h[0] = 1.0;
    s1.r = 4.0;
    s2.h = VecX::Zero(4);
    s2.h[2] = 1.0;
    s2.r = 2.5;
    sensors = {s1, s2};

    oracle::LinearGaussianModel lg;
    lg.F = model.transition();
    lg.Q = model.noise_covariance();
    lg.H = MatX::Zero(2, 4);
    lg.H(0, 0) = 1.0;
    lg.H(1, 2) = 1.0;
    lg.R = MatX::Zero(2, 2);
    lg.R(0, 0) = 4.0;
    lg.R(1, 1) = 2.5;

    const MatX l0 = MatX::Identity(4, 4) * 0.2;
    const auto kalman = oracle::kalman_info_recursion(l0, lg, 50);

    // particle placement is irrelevant for a linear model
    ParticleSet particles;
    particles.states = MatX::Random(4, 3);
    particles.weights = VecX::Constant(3, 1.0 / 3);

    MatX l = l0;
    for (int k = 0; k < 50; ++k) {
        const auto blocks = b_blocks_state(particles, model);
        l = local_fim_update(l, blocks, j_raw(particles, sensors));
        CHECK((l - kalman[k]).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((l - l.transpose()).cwiseAbs().maxCoeff() < 1e-10 * l.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("global fusion: same arithmetic as the local update") {
    BBlocks blocks{scalar(1), scalar(-1), scalar(1)};
    CBlocks c{blocks.b11, blocks.b12, blocks.b22_transition + scalar(1)};
    CHECK(global_fusion(scalar(1), c)(0, 0) ==
          Approx(local_fim_update(scalar(1), blocks, scalar(1))(0, 0)));
}

TEST_CASE("global fusion: single-node reduction telescopes") {
    const ScalarTransition model{.a = 0.9, .b = 0.0, .q = 0.5};
    const auto particles = particles_from({0.4, -1.0, 2.0});
    std::vector<LinearSensor> sensors{scalar_sensor(2.0)};

    MatX l = scalar(1.2);
    MatX g = l;
    for (int k = 0; k < 50; ++k) {
        const auto blocks = b_blocks_state(particles, model);
        const MatX j = j_quantized(particles, sensors, QuantizerSpec::uniform(2, -4, 4));
        const MatX l_next = local_fim_update(l, blocks, j);
        const MatX l_pred = predictive_fim_update(l, blocks);

        CBlocks c;
        c.c11 = blocks.b11;
        c.c12 = blocks.b12;
        c.c22 = (l_next - l_pred) + model.noise_information();
        g = global_fusion(g, c);
        l = l_next;
        CHECK(std::abs(g(0, 0) - l(0, 0)) < 1e-10 * std::abs(l(0, 0)));
    }
}

TEST_CASE("global fusion: two-node network equals pooled centralized recursion") {
    const ScalarTransition model{.a = 0.95, .b = 0.0, .q = 0.3};
    const auto particles = particles_from({0.0});
    std::vector<LinearSensor> node1{scalar_sensor(1.5)};
    std::vector<LinearSensor> node2{scalar_sensor(0.7)};
    std::vector<LinearSensor> pooled{scalar_sensor(1.5), scalar_sensor(0.7)};

    MatX l1 = scalar(1.0), l2 = scalar(1.0), g = scalar(1.0), cent = scalar(1.0);
    for (int k = 0; k < 30; ++k) {
        const auto blocks = b_blocks_state(particles, model);
        const MatX l1_next = local_fim_update(l1, blocks, j_raw(particles, node1));
        const MatX l2_next = local_fim_update(l2, blocks, j_raw(particles, node2));
        const MatX d = (l1_next - predictive_fim_update(l1, blocks)) +
                       (l2_next - predictive_fim_update(l2, blocks));

        CBlocks c{blocks.b11, blocks.b12, d + model.noise_information()};
        g = global_fusion(g, c);
        cent = local_fim_update(cent, blocks, j_raw(particles, pooled));
        l1 = l1_next;
        l2 = l2_next;
        CHECK(std::abs(g(0, 0) - cent(0, 0)) < 1e-10 * std::abs(cent(0, 0)));
    }
}

TEST_CASE("information ordering between raw and quantized recursions") {
    const ScalarTransition model{.a = 1.0, .b = 0.0, .q = 1.0};
    const auto particles = particles_from({0.25});
    std::vector<LinearSensor> sensors{scalar_sensor()};
    const auto spec = QuantizerSpec::uniform(2, -3, 3);

    MatX l_raw = scalar(1.0), l_q = scalar(1.0);
    for (int k = 0; k < 40; ++k) {
        const auto blocks = b_blocks_state(particles, model);
        l_raw = local_fim_update(l_raw, blocks, j_raw(particles, sensors));
        l_q = local_fim_update(l_q, blocks, j_quantized(particles, sensors, spec));
        CHECK(l_raw(0, 0) >= l_q(0, 0) - 1e-8 * l_raw(0, 0));
    }
}

TEST_CASE("quantized recursion is monotone in bit depth") {
    const ScalarTransition model{.a = 1.0, .b = 0.0, .q = 1.0};
    const auto particles = particles_from({0.1});
    std::vector<LinearSensor> sensors{scalar_sensor()};

    std::vector<double> final_fim;
    for (int bits = 1; bits <= 8; ++bits) {
        const auto spec = QuantizerSpec::uniform(bits, -4, 4);
        MatX l = scalar(1.0);
        for (int k = 0; k < 20; ++k)
            l = local_fim_update(l, b_blocks_state(particles, model),
                                 j_quantized(particles, sensors, spec));
        final_fim.push_back(l(0, 0));
    }
    for (std::size_t i = 1; i < final_fim.size(); ++i)
        CHECK(final_fim[i] >= final_fim[i - 1] - 1e-8 * final_fim[i]);
}

TEST_CASE("rmse bound") {
    CHECK(rmse_bound(MatX::Identity(4, 4)) == Approx(std::sqrt(2.0)));

    MatX diag = MatX::Zero(4, 4);
    diag.diagonal() << 4, 1, 4, 1;
    CHECK(rmse_bound(diag) == Approx(std::sqrt(0.5)).epsilon(1e-12));

    Rng rng(4);
    const MatX base = random_psd(4, rng);
    const MatX extra = random_psd(4, rng, 0.1);
    CHECK(rmse_bound(base + extra) <= rmse_bound(base) + 1e-12);

    CHECK_THROWS_AS(rmse_bound(MatX::Zero(4, 4)), NumericalError);
}
