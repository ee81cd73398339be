#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "kseg/losses.hpp"
#include "test_util.hpp"

using namespace kseg;

TEST_CASE("contrastive loss on hand-computed cases") {
    ContrastiveConfig cfg;  // margin 1
    SUBCASE("same pair at distance 0 costs nothing") {
        CHECK(contrastive_loss({1, 2, 3}, {1, 2, 3}, 1, cfg) == doctest::Approx(0.0));
    }
    SUBCASE("opposite pair beyond the margin costs nothing") {
        CHECK(contrastive_loss({0, 0}, {2, 0}, 0, cfg) == doctest::Approx(0.0));
        CHECK(contrastive_loss({0, 0}, {1, 0}, 0, cfg) == doctest::Approx(0.0));  // exactly at margin
    }
    SUBCASE("opposite pair at distance 0.4 costs (1-0.4)^2 = 0.36") {
        CHECK(contrastive_loss({0.0}, {0.4}, 0, cfg) == doctest::Approx(0.36));
    }
    SUBCASE("same pair at distance 0.5 costs d^2 = 0.25") {
        CHECK(contrastive_loss({0.0, 0.0}, {0.3, 0.4}, 1, cfg) == doctest::Approx(0.25));
    }
    SUBCASE("loss is symmetric in the two embeddings") {
        std::vector<double> a{0.2, -0.7, 1.1}, b{-0.4, 0.3, 0.9};
        for (int y : {0, 1})
            CHECK(contrastive_loss(a, b, y, cfg) == doctest::Approx(contrastive_loss(b, a, y, cfg)));
    }
    SUBCASE("same-pair loss grows with distance, opposite-pair loss shrinks") {
        double prev_same = -1, prev_opp = 2;
        for (double d : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            double ls = contrastive_loss({0.0}, {d}, 1, cfg);
            double lo = contrastive_loss({0.0}, {d}, 0, cfg);
            CHECK(ls > prev_same);
            CHECK(lo < prev_opp);
            prev_same = ls;
            prev_opp = lo;
        }
    }
    SUBCASE("invalid inputs error") {
        CHECK_THROWS(contrastive_loss({1, 2}, {1, 2, 3}, 1, cfg));
        CHECK_THROWS(contrastive_loss({1}, {1}, 2, cfg));
        ContrastiveConfig bad;
        bad.margin = 0.0;
        CHECK_THROWS(contrastive_loss({1}, {2}, 1, bad));
    }
}

TEST_CASE("contrastive analytic gradients match finite differences") {
    ContrastiveConfig cfg;
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (int y : {0, 1}) {
        std::vector<double> a(5), b(5);
        for (auto& x : a) x = u(rng);
        for (auto& x : b) x = u(rng);
        std::vector<double> ga, gb;
        contrastive_loss(a, b, y, cfg, &ga, &gb);
        for (size_t i = 0; i < a.size(); ++i) {
            double num_a = testutil::central_diff(
                [&](double v) {
                    std::vector<double> aa = a;
                    aa[i] = v;
                    return contrastive_loss(aa, b, y, cfg);
                },
                a[i], 1e-6);
            double num_b = testutil::central_diff(
                [&](double v) {
                    std::vector<double> bb = b;
                    bb[i] = v;
                    return contrastive_loss(a, bb, y, cfg);
                },
                b[i], 1e-6);
            CHECK(testutil::grad_close(ga[i], num_a, 1e-5));
            CHECK(testutil::grad_close(gb[i], num_b, 1e-5));
        }
    }
}

TEST_CASE("soft dice loss values, range, and gradient") {
    SUBCASE("perfect binary prediction scores ~0, disjoint ~1") {
        std::vector<uint8_t> t{1, 1, 0, 0};
        CHECK(soft_dice_loss({1, 1, 0, 0}, t) == doctest::Approx(0.0).epsilon(1e-5));
        CHECK(soft_dice_loss({0, 0, 1, 1}, t) == doctest::Approx(1.0).epsilon(1e-4));
    }
    SUBCASE("uniform 0.5 on an all-foreground 4x4x4 block scores 1/3") {
        std::vector<double> p(64, 0.5);
        std::vector<uint8_t> t(64, 1);
        // 1 - 2*32/(32+64) with negligible eps
        CHECK(soft_dice_loss(p, t) == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
    }
    SUBCASE("always inside [0, 1]") {
        std::mt19937_64 rng(22);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int it = 0; it < 50; ++it) {
            std::vector<double> p(30);
            std::vector<uint8_t> t(30);
            for (auto& x : p) x = u(rng);
            for (auto& x : t) x = rng() % 2;
            double l = soft_dice_loss(p, t);
            CHECK(l >= 0.0);
            CHECK(l <= 1.0);
        }
    }
    SUBCASE("gradient matches finite differences") {
        std::mt19937_64 rng(23);
        std::uniform_real_distribution<double> u(0.05, 0.95);
        std::vector<double> p(20);
        std::vector<uint8_t> t(20);
        for (auto& x : p) x = u(rng);
        for (auto& x : t) x = rng() % 2;
        std::vector<double> g;
        soft_dice_loss(p, t, 1e-5, &g);
        for (size_t i = 0; i < p.size(); ++i) {
            double num = testutil::central_diff(
                [&](double v) {
                    std::vector<double> pp = p;
                    pp[i] = v;
                    return soft_dice_loss(pp, t);
                },
                p[i], 1e-6);
            CHECK(testutil::grad_close(g[i], num, 1e-5));
        }
    }
    SUBCASE("out-of-range probabilities and shape mismatch error") {
        CHECK_THROWS(soft_dice_loss({1.2}, {1}));
        CHECK_THROWS(soft_dice_loss({-0.1}, {1}));
        CHECK_THROWS(soft_dice_loss({0.5, 0.5}, {1}));
    }
}

TEST_CASE("weighted binary cross-entropy") {
    SUBCASE("uniform 0.5, unit weight gives ln 2") {
        std::vector<double> p(16, 0.5);
        std::vector<uint8_t> t{1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
        CHECK(weighted_bce(p, t, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("foreground weight scales only foreground terms") {
        std::vector<double> p{0.5, 0.5};
        std::vector<uint8_t> t{1, 0};
        double l1 = weighted_bce(p, t, 1.0);
        double l3 = weighted_bce(p, t, 3.0);
        // fg term triples, bg term unchanged: (3*ln2 + ln2)/2 vs (ln2 + ln2)/2
        CHECK(l3 == doctest::Approx(2.0 * l1).epsilon(1e-12));
    }
    SUBCASE("extreme probabilities stay finite via clamping") {
        double l = weighted_bce({0.0, 1.0}, {1, 0}, 1.0);
        CHECK(std::isfinite(l));
        CHECK(l == doctest::Approx(-std::log(1e-7)).epsilon(1e-6));
    }
    SUBCASE("analytic oracle on a 4-voxel example") {
        std::vector<double> p{0.9, 0.2, 0.6, 0.3};
        std::vector<uint8_t> t{1, 1, 0, 0};
        double w = 2.5;
        double expect = -(w * std::log(0.9) + w * std::log(0.2) + std::log(0.4) + std::log(0.7)) / 4;
        CHECK(weighted_bce(p, t, w) == doctest::Approx(expect).epsilon(1e-10));
    }
    SUBCASE("gradient matches finite differences") {
        std::mt19937_64 rng(24);
        std::uniform_real_distribution<double> u(0.05, 0.95);
        std::vector<double> p(20);
        std::vector<uint8_t> t(20);
        for (auto& x : p) x = u(rng);
        for (auto& x : t) x = rng() % 2;
        std::vector<double> g;
        weighted_bce(p, t, 4.0, &g);
        for (size_t i = 0; i < p.size(); ++i) {
            double num = testutil::central_diff(
                [&](double v) {
                    std::vector<double> pp = p;
                    pp[i] = v;
                    return weighted_bce(pp, t, 4.0);
                },
                p[i], 1e-6);
            CHECK(testutil::grad_close(g[i], num, 1e-5));
        }
    }
    SUBCASE("invalid weight errors") { CHECK_THROWS(weighted_bce({0.5}, {1}, 0.0)); }
}

TEST_CASE("default foreground weight is the clamped inverse frequency") {
    std::vector<uint8_t> t(1000, 0);
    CHECK(default_fg_weight(t) == doctest::Approx(100.0));  // no foreground: max clamp
    for (int i = 0; i < 100; ++i) t[size_t(i)] = 1;
    CHECK(default_fg_weight(t) == doctest::Approx(10.0));
    std::vector<uint8_t> all_fg(10, 1);
    CHECK(default_fg_weight(all_fg) == doctest::Approx(1.0));
    std::vector<uint8_t> rare(1000, 0);
    rare[0] = 1;
    CHECK(default_fg_weight(rare) == doctest::Approx(100.0));  // 1000 clamps to 100
}

TEST_CASE("loss weight schedule interpolates linearly and sums to one") {
    LossSchedule s;
    s.total_epochs = 60;
    auto [b0, d0] = schedule_weights(0, s);
    CHECK(b0 == doctest::Approx(0.6));
    CHECK(d0 == doctest::Approx(0.4));
    auto [bl, dl] = schedule_weights(59, s);
    CHECK(bl == doctest::Approx(0.4));
    CHECK(dl == doctest::Approx(0.6));

    LossSchedule odd = s;
    odd.total_epochs = 61;
    auto [bm, dm] = schedule_weights(30, odd);
    CHECK(bm == doctest::Approx(0.5));
    CHECK(dm == doctest::Approx(0.5));

    double prev = 1.0;
    for (int e = 0; e < 60; ++e) {
        auto [wb, wd] = schedule_weights(e, s);
        CHECK(wb + wd == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(wb <= prev + 1e-15);  // monotone toward the dice-heavy end
        CHECK(wb >= 0.4 - 1e-12);
        CHECK(wb <= 0.6 + 1e-12);
        prev = wb;
    }

    LossSchedule one = s;
    one.total_epochs = 1;
    auto [b1, d1] = schedule_weights(0, one);
    CHECK(b1 == doctest::Approx(0.6));

    CHECK_THROWS(schedule_weights(-1, s));
    CHECK_THROWS(schedule_weights(60, s));
}

TEST_CASE("composite loss recombines its parts exactly") {
    std::mt19937_64 rng(25);
    std::uniform_real_distribution<double> u(0.05, 0.95), un(-1.0, 1.0);
    std::vector<double> p(27), recon(27), input(27);
    std::vector<uint8_t> t(27);
    for (auto& x : p) x = u(rng);
    for (auto& x : recon) x = un(rng);
    for (auto& x : input) x = un(rng);
    for (auto& x : t) x = rng() % 2;
    LossSchedule s;
    s.total_epochs = 10;
    double lambda = 0.1, w = 3.0;

    SegLossBreakdown out = composite_seg_loss(p, t, recon, input, 4, s, lambda, w);
    double bce = weighted_bce(p, t, w);
    double dsc = soft_dice_loss(p, t);
    double mse = 0;
    for (size_t i = 0; i < recon.size(); ++i) mse += (recon[i] - input[i]) * (recon[i] - input[i]);
    mse /= double(recon.size());
    auto [wb, wd] = schedule_weights(4, s);
    CHECK(out.bce == doctest::Approx(bce).epsilon(1e-12));
    CHECK(out.dice == doctest::Approx(dsc).epsilon(1e-12));
    CHECK(out.recon == doctest::Approx(mse).epsilon(1e-12));
    CHECK(out.w_bce == doctest::Approx(wb));
    CHECK(out.total ==
          doctest::Approx(wb * bce + wd * dsc + lambda * mse).epsilon(1e-12));

    SUBCASE("lambda 0 removes the reconstruction term") {
        SegLossBreakdown z = composite_seg_loss(p, t, recon, input, 4, s, 0.0, w);
        CHECK(z.total == doctest::Approx(wb * bce + wd * dsc).epsilon(1e-12));
    }
    SUBCASE("gradients match finite differences") {
        std::vector<double> gp, gr;
        composite_seg_loss(p, t, recon, input, 4, s, lambda, w, &gp, &gr);
        for (size_t i = 0; i < p.size(); i += 5) {
            double num = testutil::central_diff(
                [&](double v) {
                    std::vector<double> pp = p;
                    pp[i] = v;
                    return composite_seg_loss(pp, t, recon, input, 4, s, lambda, w).total;
                },
                p[i], 1e-6);
            CHECK(testutil::grad_close(gp[i], num, 1e-5));
        }
        for (size_t i = 0; i < recon.size(); i += 5) {
            double num = testutil::central_diff(
                [&](double v) {
                    std::vector<double> rr = recon;
                    rr[i] = v;
                    return composite_seg_loss(p, t, rr, input, 4, s, lambda, w).total;
                },
                recon[i], 1e-6);
            CHECK(testutil::grad_close(gr[i], num, 1e-5));
        }
    }
    SUBCASE("recon/input size mismatch errors") {
        std::vector<double> short_in(input.begin(), input.end() - 1);
        CHECK_THROWS(composite_seg_loss(p, t, recon, short_in, 4, s, lambda, w));
    }
}
