#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <span>
#include <tuple>
#include <vector>

#include "oracles.hpp"
#include "owcdc/channel.hpp"

using namespace owcdc;

namespace {

Emitter down_emitter(Vec3 at, double mode = 1.0, double power = 1.0) { return {at, {0, 0, -1}, mode, power}; }

Detector up_detector(Vec3 at, double area = 1e-4, double fov = 90.0) { return {at, {0, 0, 1}, area, fov}; }

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    return normalized(Vec3{g(rng), g(rng), g(rng)});
}

const Scenario& shared_default(ReceiverKind kind) {
    static const Scenario adr = paper_default_scenario(ReceiverKind::Adr);
    static const Scenario wfov = paper_default_scenario(ReceiverKind::Wfov);
    return kind == ReceiverKind::Adr ? adr : wfov;
}

const ReflectionMesh& shared_mesh() {
    static const ReflectionMesh m{Room{}};
    return m;
}

}  // namespace

TEST(LosGain, Examples) {
    const double g1 = los_gain(down_emitter({0, 0, 1}), up_detector({0, 0, 0}));
    EXPECT_NEAR(g1, 2.0 / (2.0 * std::numbers::pi) * 1e-4, 1e-18);
    EXPECT_NEAR(g1, 3.1831e-5, 1e-9);
    const double g2 = los_gain(down_emitter({0, 0, 2}), up_detector({0, 0, 0}));
    EXPECT_NEAR(g2, 7.9577e-6, 1e-10);
    EXPECT_NEAR(g2, g1 / 4, 1e-18);

    const double th = 10.0 * std::numbers::pi / 180;
    const Detector tilted{{0, 0, 0}, {std::sin(th), 0, std::cos(th)}, 1e-4, 5.0};
    EXPECT_EQ(los_gain(down_emitter({0, 0, 1}), tilted), 0.0);
}

TEST(LosGain, MatchesClosedFormOnRandomGeometries) {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> u(-3, 3), mode(1, 200), area(1e-6, 1e-3), fov(5, 90);
    int nonzero = 0;
    for (int i = 0; i < 100; ++i) {
        // Both ends roughly face each other so most cases are lit.
        const Vec3 a{u(rng), u(rng), 3 + u(rng)}, b{u(rng), u(rng), u(rng) - 3};
        const Emitter em{a, normalized(normalized(b - a) + random_unit(rng) * 0.3), mode(rng), 1.0};
        const Detector det{b, normalized(normalized(a - b) + random_unit(rng) * 0.3), area(rng), fov(rng)};
        const oracle::Sensor s{oracle::p3(det.position), oracle::p3(det.normal), det.area_m2, det.fov_deg};
        double expect = 0.0;
        if (oracle::in_fov(s, oracle::p3(em.position))) {
            expect = oracle::transfer(oracle::p3(em.position), oracle::p3(em.direction), em.mode, s.pos, s.normal, s.area);
        }
        const double got = los_gain(em, det);
        if (expect == 0.0) {
            EXPECT_EQ(got, 0.0);
        } else {
            ++nonzero;
            EXPECT_LE(rel(got, expect), 1e-12);
        }
    }
    EXPECT_GT(nonzero, 50);
}

TEST(LosGain, InverseSquare) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 50; ++i) {
        const Vec3 dir = normalized(Vec3{u(rng) * 0.3, u(rng) * 0.3, -1});
        const Vec3 off{u(rng), u(rng), -1.5};
        const Emitter em{{0, 0, 0}, dir, 3.0, 1.0};
        const double g = los_gain(em, {off, {0, 0, 1}, 1e-4, 90});
        for (double s : {2.0, 4.0}) {
            EXPECT_LE(rel(los_gain(em, {off * s, {0, 0, 1}, 1e-4, 90}) * s * s, g), 1e-9);
        }
    }
}

TEST(LosGain, FovCutoffIsExact) {
    const Emitter em = down_emitter({0, 0, 1});
    for (double fov : {5.0, 30.0, 60.0}) {
        const double f = fov * std::numbers::pi / 180;
        const Detector inside{{0, 0, 0}, {std::sin(f * 0.999), 0, std::cos(f * 0.999)}, 1e-4, fov};
        const Detector outside{{0, 0, 0}, {std::sin(f * 1.001), 0, std::cos(f * 1.001)}, 1e-4, fov};
        EXPECT_GT(los_gain(em, inside), 0.0);
        EXPECT_EQ(los_gain(em, outside), 0.0);
    }
    EXPECT_EQ(los_gain(down_emitter({0, 0, 1}), up_detector({0, 0, 2})), 0.0);
}

TEST(LosGain, Errors) {
    EXPECT_THROW(los_gain(down_emitter({0, 0, 1}), up_detector({0, 0, 0}, 0.0)), DomainError);
    EXPECT_THROW(los_gain(down_emitter({0, 0, 1}, 0.5), up_detector({0, 0, 0})), DomainError);
    EXPECT_THROW(los_gain(down_emitter({0, 0, 0}), up_detector({0, 0, 0})), GeometryError);
}

TEST(ImpulseResponse, DarkRoomGivesOnlyTheDirectBin) {
    Room r;
    r.reflectance = {0, 0, 0, 0, 0, 0};
    const ReflectionMesh mesh(r);
    const Emitter em = down_emitter({4, 4, 3}, 1.0, 1e-3);
    const Detector det = up_detector({4, 4, 0.0}, 1e-4);
    const auto h = impulse_response(em, det, mesh, 2, 0.1e-9);
    std::size_t nonzero = 0, where = 0;
    for (std::size_t i = 0; i < h.bins.size(); ++i)
        if (h.bins[i] != 0.0) ++nonzero, where = i;
    EXPECT_EQ(nonzero, 1u);
    EXPECT_EQ(where, 100u);
    EXPECT_NEAR(h.bin_start(where), 10.0e-9, 1e-18);
    EXPECT_EQ(h.bins[where], 1e-3 * los_gain(em, det));
}

TEST(ImpulseResponse, ReflectionsOnlyAddPower) {
    const Scenario& s = shared_default(ReceiverKind::Wfov);
    const Emitter em = emitter_of(s.transmitters[1], 1);
    const Detector det = detector_of(s.receivers[1], 0);
    const double p0 = impulse_response(em, det, shared_mesh(), 0, 1e-10).total_power();
    const double p1 = impulse_response(em, det, shared_mesh(), 1, 1e-10).total_power();
    const double p2 = impulse_response(em, det, shared_mesh(), 2, 1e-10).total_power();
    EXPECT_GT(p0, 0.0);
    EXPECT_GE(p1, p0);
    EXPECT_GE(p2, p1);
}

TEST(ImpulseResponse, MatchesBruteForceDoubleLoop) {
    for (ReceiverKind kind : {ReceiverKind::Wfov, ReceiverKind::Adr}) {
        const Scenario& s = shared_default(kind);
        const std::size_t rb = kind == ReceiverKind::Adr ? 1 : 0;
        const Emitter em = emitter_of(s.transmitters[1], 1);
        const Detector det = detector_of(s.receivers[1], rb);
        const auto h = impulse_response(em, det, shared_mesh(), 2, 1e-10);
        const auto [los, first, second] = oracle::brute_force_power(
            {oracle::p3(em.position), oracle::p3(em.direction), em.mode, em.power_w},
            {oracle::p3(det.position), oracle::p3(det.normal), det.area_m2, det.fov_deg},
            oracle::patches(shared_mesh().first_order()), oracle::patches(shared_mesh().second_order()));
        EXPECT_LE(rel(h.total_power(), los + first + second), 1e-9) << receiver_kind_name(kind);
        const auto sum = summarize_link(em, det, shared_mesh(), 2, 1e-10);
        EXPECT_LE(rel(sum.los_w, los), 1e-12);
        if (first > 0.0) {
            EXPECT_LE(rel(sum.first_order_w, first), 1e-9);
        }
        if (second > 0.0) {
            EXPECT_LE(rel(sum.second_order_w, second), 1e-9);
        }
    }
}

TEST(ImpulseResponse, BinWidthDoesNotChangeTotalPower) {
    const Scenario& s = shared_default(ReceiverKind::Wfov);
    const Emitter em = emitter_of(s.transmitters[2], 0);
    const Detector det = detector_of(s.receivers[2], 0);
    const double ref = impulse_response(em, det, shared_mesh(), 2, 1e-10).total_power();
    for (double bw : {1e-11, 2.5e-10, 1e-9, 1e-8}) {
        EXPECT_LE(rel(impulse_response(em, det, shared_mesh(), 2, bw).total_power(), ref), 1e-12);
    }
}

TEST(ImpulseResponse, BinsCoverHalfOpenIntervals) {
    ImpulseResponse h{1e-9, 0.0, {}};
    h.add(0.0, 1.0);
    h.add(0.999e-9, 1.0);
    h.add(1e-9, 1.0);
    ASSERT_EQ(h.bins.size(), 2u);
    EXPECT_EQ(h.bins[0], 2.0);
    EXPECT_EQ(h.bins[1], 1.0);
}

TEST(ImpulseResponse, RejectsBadOrdersAndWidths) {
    const Emitter em = down_emitter({4, 4, 3});
    const Detector det = up_detector({4, 4, 1});
    EXPECT_THROW(impulse_response(em, det, shared_mesh(), 3, 1e-10), ConfigError);
    EXPECT_THROW(impulse_response(em, det, shared_mesh(), -1, 1e-10), ConfigError);
    EXPECT_THROW(impulse_response(em, det, shared_mesh(), 2, 0.0), ConfigError);
    EXPECT_THROW(impulse_response(em, det, ReflectionMesh{}, 1, 1e-10), ConfigError);
    EXPECT_NO_THROW(impulse_response(em, det, ReflectionMesh{}, 0, 1e-10));
}

TEST(Paths, SingleBounceObeysReflectanceBound) {
    const Scenario& s = shared_default(ReceiverKind::Wfov);
    const Emitter em = emitter_of(s.transmitters[0], 0);
    const Detector det = detector_of(s.receivers[0], 0);
    const auto& fine = shared_mesh().first_order();
    std::size_t checked = 0;
    for (const auto& p : enumerate_paths(em, det, shared_mesh(), 1)) {
        if (p.order != 1) continue;
        const auto& el = fine.at(static_cast<std::size_t>(p.first_element));
        EXPECT_LE(p.power_w, el.reflectance * incident_power(em, el));
        ++checked;
    }
    EXPECT_GT(checked, 100u);
}

TEST(Paths, EnumerationOrderIsFixed) {
    const Scenario& s = shared_default(ReceiverKind::Wfov);
    const Emitter em = emitter_of(s.transmitters[1], 1);
    const Detector det = detector_of(s.receivers[1], 0);
    const auto paths = enumerate_paths(em, det, shared_mesh(), 2);
    ASSERT_FALSE(paths.empty());
    EXPECT_EQ(paths.front().order, 0);
    for (std::size_t i = 1; i < paths.size(); ++i) {
        const auto& a = paths[i - 1];
        const auto& b = paths[i];
        EXPECT_TRUE(std::tie(a.order, a.first_element, a.second_element) <
                    std::tie(b.order, b.first_element, b.second_element));
    }
}

TEST(DelaySpread, Examples) {
    ImpulseResponse one{1e-10, 0.0, {}};
    one.add(3e-9, 1.0);
    EXPECT_EQ(delay_spread(one), 0.0);

    ImpulseResponse two{1e-9, 0.0, {}};
    two.add(0.0, 1.0);
    two.add(2e-9, 1.0);
    EXPECT_NEAR(delay_spread(two), 1e-9, 1e-21);
    const std::vector<PathContribution> taps{{0, 0.0, 1.0}, {0, 2e-9, 1.0}};
    EXPECT_NEAR(delay_spread(std::span<const PathContribution>(taps)), 1e-9, 1e-21);

    EXPECT_THROW(delay_spread(ImpulseResponse{}), NoSignalError);
}

TEST(DelaySpread, BinnedMatchesUnbinnedWithinOneBin) {
    const Scenario& s = shared_default(ReceiverKind::Wfov);
    for (std::size_t t = 0; t < 4; ++t) {
        const Emitter em = emitter_of(s.transmitters[t], 0);
        const Detector det = detector_of(s.receivers[0], 0);
        const auto paths = enumerate_paths(em, det, shared_mesh(), 2);
        // Power-weighted RMS from the raw list, accumulated independently.
        double p = 0, pt = 0;
        for (const auto& x : paths) p += x.power_w, pt += x.power_w * x.delay_s;
        double v = 0;
        for (const auto& x : paths) v += x.power_w * (x.delay_s - pt / p) * (x.delay_s - pt / p);
        const double raw = std::sqrt(v / p);
        EXPECT_NEAR(delay_spread(std::span<const PathContribution>(paths)), raw, 1e-15);
        EXPECT_NEAR(delay_spread(impulse_response(em, det, shared_mesh(), 2, 1e-10)), raw, 1e-10);
    }
}

TEST(PowerMatrix, SixteenDistinctIntendedLinks) {
    const Scenario& s = shared_default(ReceiverKind::Adr);
    const auto links = intended_links(s);
    ASSERT_EQ(links.size(), 16u);
    std::set<std::pair<std::size_t, std::size_t>> tx_rx;
    std::set<std::pair<std::size_t, Wavelength>> tx_w;
    for (const auto& l : links) {
        EXPECT_TRUE(tx_rx.insert({l.tx, l.rx}).second);
        EXPECT_TRUE(tx_w.insert({l.tx, s.transmitters[l.tx].branches[l.branch].wavelength}).second);
    }
}

TEST(PowerMatrix, SingleLinkAimedBranchDominates) {
    Scenario s = paper_aimed_scenario(ReceiverKind::Wfov);
    for (std::size_t r = 0; r < 4; ++r) {
        Scenario one = s;
        one.transmitters = {s.transmitters[1]};
        one.receivers = {s.receivers[r]};
        const auto m = receiver_power_matrix(one, shared_mesh());
        const auto links = intended_links(one);
        ASSERT_EQ(links.size(), 1u);
        const double aimed = m.at({0, links[0].branch, 0, 0}).total_w();
        for (std::size_t b = 0; b < 4; ++b) {
            if (b != links[0].branch) {
                EXPECT_GT(aimed, m.at({0, b, 0, 0}).total_w());
            }
        }
    }
}

TEST(PowerMatrix, WideReceiverSeesAtLeastAsMuchInterference) {
    const auto madr = receiver_power_matrix(shared_default(ReceiverKind::Adr), shared_mesh());
    const auto mw = receiver_power_matrix(shared_default(ReceiverKind::Wfov), shared_mesh());
    const Scenario& s = shared_default(ReceiverKind::Adr);
    for (const auto& l : intended_links(s)) {
        // ADR branch k faces ADT k, so the corresponding branch is the serving one.
        const auto& adr = madr.at({l.tx, l.branch, l.rx, l.tx});
        EXPECT_GE(mw.at({l.tx, l.branch, l.rx, 0}).interference_w, adr.interference_w);
    }
    // Cone test: a foreign ADT outside a 5 degree branch cone adds no direct light.
    for (const auto& [k, p] : madr.entries) {
        const auto& rx = s.receivers[k.rx];
        const Vec3 to = normalized(s.transmitters[k.tx].position - rx.position);
        const double angle = std::acos(std::min(1.0, dot(to, rx.branches[k.rx_branch].normal))) * 180 / std::numbers::pi;
        if (angle > 5.0) {
            EXPECT_EQ(p.los_w, 0.0);
        }
    }
}

TEST(PowerMatrix, IndependentOfThreadCount) {
    const Scenario& s = shared_default(ReceiverKind::Adr);
    const auto m = receiver_power_matrix(s, shared_mesh());
    for (const auto& [k, p] : m.entries) {
        const auto serial = summarize_link(emitter_of(s.transmitters[k.tx], k.branch), detector_of(s.receivers[k.rx], k.rx_branch),
                                           shared_mesh(), 2, s.controls.bin_width_s);
        EXPECT_EQ(p.response.bins, serial.response.bins);
        EXPECT_EQ(p.los_w, serial.los_w);
    }
    const auto again = receiver_power_matrix(s, shared_mesh());
    for (const auto& [k, p] : m.entries) EXPECT_EQ(p.response.bins, again.at(k).response.bins);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
    for (unsigned threads : {1u, 2u, 3u, 8u}) {
        std::vector<int> hits(37, 0);
        detail::parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; }, threads);
        for (int h : hits) EXPECT_EQ(h, 1);
    }
}
