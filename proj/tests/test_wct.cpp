#include <gtest/gtest.h>

#include <cmath>

#include "fd_check.hpp"
#include "test_util.hpp"
#include "g4ds/core/rng.hpp"
#include "g4ds/nets/extractors.hpp"
#include "g4ds/wct/eigh.hpp"
#include "g4ds/wct/style_transform.hpp"

using namespace g4ds;
using namespace g4ds::wct;

namespace {

Tensor random_full_rank_samples(std::size_t n_samples, std::size_t dim, Rng& rng) {
    // z M + offset with a well-conditioned mixing matrix.
    Tensor mix = Tensor::randn({dim, dim}, rng, 0.3);
    for (std::size_t i = 0; i < dim; ++i) mix.at(i, i) += 1.0;
    Tensor z = Tensor::randn({n_samples, dim}, rng);
    Tensor out({n_samples, dim});
    mm(z, false, mix, false, out, false);
    for (std::size_t i = 0; i < n_samples; ++i)
        for (std::size_t c = 0; c < dim; ++c) out.at(i, c) += 0.1 * static_cast<double>(c);
    return out;
}

} // namespace

TEST(Covariance, IdenticalRowsGiveZero) {
    Tensor s({5, 3});
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t c = 0; c < 3; ++c) s.at(i, c) = 1.0 + static_cast<double>(c);
    Tensor cov = covariance(s);
    EXPECT_EQ(cov.max_abs(), 0.0);
}

TEST(Covariance, TwoOppositeSamples) {
    Tensor s({2, 3}, {1.0, -2.0, 0.5, -1.0, 2.0, -0.5});
    Tensor cov = covariance(s);
    const double v[3] = {1.0, -2.0, 0.5};
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) EXPECT_NEAR(cov.at(a, b), v[a] * v[b], 1e-15);
}

TEST(Covariance, StandardNormalApproachesIdentity) {
    Rng rng(100);
    Tensor s = Tensor::randn({100000, 8}, rng);
    Tensor cov = covariance(s);
    for (std::size_t a = 0; a < 8; ++a)
        for (std::size_t b = 0; b < 8; ++b)
            EXPECT_NEAR(cov.at(a, b), a == b ? 1.0 : 0.0, 0.05);
}

TEST(Eigh, Identity) {
    Tensor m({4, 4});
    for (std::size_t i = 0; i < 4; ++i) m.at(i, i) = 1.0;
    auto dec = eigh(m);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(dec.eigenvalues[i], 1.0);
}

TEST(Eigh, DiagonalSortedWithAxisVectors) {
    Tensor m({3, 3});
    m.at(0, 0) = 1.0;
    m.at(1, 1) = 4.0;
    m.at(2, 2) = 2.0;
    auto dec = eigh(m);
    EXPECT_DOUBLE_EQ(dec.eigenvalues[0], 4.0);
    EXPECT_DOUBLE_EQ(dec.eigenvalues[1], 2.0);
    EXPECT_DOUBLE_EQ(dec.eigenvalues[2], 1.0);
    EXPECT_NEAR(std::abs(dec.eigenvectors.at(1, 0)), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(dec.eigenvectors.at(2, 1)), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(dec.eigenvectors.at(0, 2)), 1.0, 1e-12);
    // Sign convention: first nonzero component positive.
    EXPECT_GT(dec.eigenvectors.at(1, 0), 0.0);
}

TEST(Eigh, ReconstructionAndOrthonormality) {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor s = random_full_rank_samples(128, 16, rng);
        Tensor cov = covariance(s);
        auto dec = eigh(cov);
        Tensor rec = dec.reconstruct();
        EXPECT_LT(rec.max_abs_diff(cov), 1e-8);
        const std::size_t n = 16;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double dot = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    dot += dec.eigenvectors.at(k, i) * dec.eigenvectors.at(k, j);
                EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-8);
            }
    }
}

TEST(Eigh, NonFiniteInputFailsToConverge) {
    Tensor m({3, 3});
    m.at(0, 1) = m.at(1, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(eigh(m), std::runtime_error);
}

TEST(ClosedForm, MatchedInputsGiveIdentity) {
    Rng rng(21);
    Tensor s = random_full_rank_samples(200, 32, rng);
    StyleTransform tr = closed_form_transform(s, s);
    Tensor p = tr.combined();
    for (std::size_t i = 0; i < 32; ++i)
        for (std::size_t j = 0; j < 32; ++j)
            EXPECT_NEAR(p.at(i, j), i == j ? 1.0 : 0.0, 1e-8);
}

TEST(ClosedForm, TwoDimensionalAnalytic) {
    // cov_c = diag(4,1) exactly, cov_s = I exactly.
    Tensor fc({4, 2}, {2, 1, 2, -1, -2, 1, -2, -1});
    Tensor fs({4, 2}, {1, 1, 1, -1, -1, 1, -1, -1});
    StyleTransform tr = closed_form_transform(fc, fs);
    EXPECT_NEAR(tr.whitening.at(0, 0), 0.5, 1e-12);
    EXPECT_NEAR(tr.whitening.at(1, 1), 1.0, 1e-12);
    EXPECT_NEAR(tr.whitening.at(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(tr.coloring.at(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(tr.coloring.at(1, 1), 1.0, 1e-12);
    EXPECT_NEAR(tr.coloring.at(0, 1), 0.0, 1e-12);
}

TEST(ClosedForm, CovarianceMatchOnRandomPairs) {
    Rng rng(22);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor fc = random_full_rank_samples(150, 32, rng);
        Tensor fs = random_full_rank_samples(150, 32, rng);
        StyleTransform tr = closed_form_transform(fc, fs);
        Tensor transformed = apply_transform(fc, tr);
        Tensor cov_t = covariance(transformed);
        Tensor cov_s = covariance(fs, tr.style_mean);
        EXPECT_LT(cov_t.max_abs_diff(cov_s), 1e-6);
    }
}

TEST(ClosedForm, WhiteningAloneGivesIdentityCovariance) {
    Rng rng(23);
    Tensor fc = random_full_rank_samples(200, 32, rng);
    StyleTransform tr = closed_form_transform(fc, fc);
    StyleTransform white = tr;
    white.coloring = Tensor({32, 32});
    for (std::size_t i = 0; i < 32; ++i) white.coloring.at(i, i) = 1.0;
    white.style_mean = Tensor({32});
    Tensor out = apply_transform(fc, white);
    Tensor cov = covariance(out);
    for (std::size_t i = 0; i < 32; ++i)
        for (std::size_t j = 0; j < 32; ++j)
            EXPECT_NEAR(cov.at(i, j), i == j ? 1.0 : 0.0, 1e-6);
}

TEST(CovarianceLoss, ZeroWhenEqualAndAfterClosedForm) {
    Rng rng(24);
    Tensor fs = random_full_rank_samples(100, 32, rng);
    Tensor mu = sample_mean(fs);
    Tensor centered({100, 32});
    for (std::size_t i = 0; i < 100; ++i)
        for (std::size_t c = 0; c < 32; ++c) centered.at(i, c) = fs.at(i, c) - mu[c];
    EXPECT_DOUBLE_EQ(covariance_gap(centered, centered), 0.0);

    Tensor fc = random_full_rank_samples(120, 32, rng);
    StyleTransform tr = closed_form_transform(fc, fs);
    Tensor tc = apply_transform(fc, tr);
    Tensor mu_t = sample_mean(tc);
    Tensor centered_t({120, 32});
    for (std::size_t i = 0; i < 120; ++i)
        for (std::size_t c = 0; c < 32; ++c) centered_t.at(i, c) = tc.at(i, c) - mu_t[c];
    EXPECT_LT(covariance_gap(centered_t, centered), 1e-10);

    // Doubling one side strictly breaks a previously matched pair.
    Tensor doubled = centered_t;
    for (std::size_t i = 0; i < doubled.numel(); ++i) doubled[i] *= 2.0;
    EXPECT_GT(covariance_gap(doubled, centered), covariance_gap(centered_t, centered));
}

TEST(ApplyTransform, TrivialCases) {
    Rng rng(25);
    Tensor f = Tensor::randn({4, 5, 32}, rng);
    StyleTransform id;
    id.whitening = Tensor({32, 32});
    id.coloring = Tensor({32, 32});
    for (std::size_t i = 0; i < 32; ++i) {
        id.whitening.at(i, i) = 1.0;
        id.coloring.at(i, i) = 1.0;
    }
    id.content_mean = Tensor({32});
    id.style_mean = Tensor({32});

    Tensor same = apply_transform(f, id);
    EXPECT_EQ(same.max_abs_diff(f), 0.0);

    StyleTransform twice = id;
    for (std::size_t i = 0; i < 32; ++i) twice.coloring.at(i, i) = 2.0;
    Tensor doubled = apply_transform(f, twice);
    for (std::size_t i = 0; i < f.numel(); ++i) EXPECT_DOUBLE_EQ(doubled[i], 2.0 * f[i]);
}

TEST(ApplyTransform, MatchesPerPixelLoop) {
    Rng rng(26);
    Tensor f = Tensor::randn({6, 7, 32}, rng);
    Tensor fc = random_full_rank_samples(100, 32, rng);
    Tensor fs = random_full_rank_samples(100, 32, rng);
    StyleTransform tr = closed_form_transform(fc, fs);
    Tensor fast = apply_transform(f, tr);

    Tensor p = tr.combined();
    for (std::size_t y = 0; y < 6; ++y)
        for (std::size_t x = 0; x < 7; ++x)
            for (std::size_t r = 0; r < 32; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < 32; ++c)
                    acc += p.at(r, c) * (f.at(y, x, c) - tr.content_mean[c]);
                acc += tr.style_mean[r];
                EXPECT_NEAR(fast.at(y, x, r), acc, 1e-12);
            }
}

TEST(ApplyTransform, MeanMatchesStyleMean) {
    Rng rng(27);
    Tensor f = Tensor::randn({8, 8, 32}, rng);
    Tensor fc = random_full_rank_samples(64, 32, rng);
    Tensor fs = random_full_rank_samples(64, 32, rng);
    StyleTransform tr = closed_form_transform(fc, fs);
    // Force content_mean = actual pixel mean of f.
    Tensor mu({32});
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x)
            for (std::size_t c = 0; c < 32; ++c) mu[c] += f.at(y, x, c);
    for (std::size_t c = 0; c < 32; ++c) mu[c] /= 64.0;
    tr.content_mean = mu;
    Tensor out = apply_transform(f, tr);
    for (std::size_t c = 0; c < 32; ++c) {
        double m = 0.0;
        for (std::size_t y = 0; y < 8; ++y)
            for (std::size_t x = 0; x < 8; ++x) m += out.at(y, x, c);
        m /= 64.0;
        EXPECT_NEAR(m, tr.style_mean[c], 1e-9);
    }
}

TEST(Interpolate, EndpointIsExact) {
    Rng rng(28);
    Tensor f = Tensor::randn({4, 4, 32}, rng);
    Tensor fc = random_full_rank_samples(80, 32, rng);
    StyleTransform a = closed_form_transform(fc, random_full_rank_samples(80, 32, rng));
    StyleTransform b = closed_form_transform(fc, random_full_rank_samples(80, 32, rng));
    StyleTransform blend = interpolate_styles({{a, 1.0}, {b, 0.0}});
    Tensor out_blend = apply_transform(f, blend);
    Tensor out_a = apply_transform(f, a);
    EXPECT_EQ(out_blend.max_abs_diff(out_a), 0.0);
}

TEST(Interpolate, HalfBlendEqualsPixelBlend) {
    Rng rng(29);
    Tensor f = Tensor::randn({5, 5, 32}, rng);
    Tensor fc = random_full_rank_samples(80, 32, rng);
    StyleTransform a = closed_form_transform(fc, random_full_rank_samples(80, 32, rng));
    StyleTransform b = closed_form_transform(fc, random_full_rank_samples(80, 32, rng));
    StyleTransform blend = interpolate_styles({{a, 0.5}, {b, 0.5}});
    Tensor out_blend = apply_transform(f, blend);
    Tensor out_a = apply_transform(f, a);
    Tensor out_b = apply_transform(f, b);
    for (std::size_t i = 0; i < f.numel(); ++i)
        EXPECT_NEAR(out_blend[i], 0.5 * out_a[i] + 0.5 * out_b[i], 1e-12);
}

TEST(Interpolate, IdenticalStylesAnyWeights) {
    Rng rng(30);
    Tensor f = Tensor::randn({4, 4, 32}, rng);
    Tensor fc = random_full_rank_samples(80, 32, rng);
    StyleTransform a = closed_form_transform(fc, random_full_rank_samples(80, 32, rng));
    StyleTransform blend = interpolate_styles({{a, 0.25}, {a, 0.75}});
    EXPECT_LT(apply_transform(f, blend).max_abs_diff(apply_transform(f, a)), 1e-12);
}

TEST(Interpolate, RejectsBadWeights) {
    Rng rng(31);
    Tensor fc = random_full_rank_samples(80, 32, rng);
    StyleTransform a = closed_form_transform(fc, fc);
    EXPECT_THROW(interpolate_styles({{a, 0.5}, {a, 0.6}}), std::invalid_argument);
    EXPECT_THROW(interpolate_styles({{a, -0.5}, {a, 1.5}}), std::invalid_argument);
}

TEST(Predictor, IdentityAtInitialization) {
    Rng rng(32);
    nets::TransformPredictor pred("mlp_c", rng);
    Tensor samples = random_full_rank_samples(100, 32, rng);
    Tape t;
    Var out = pred.forward(t, t.constant(samples));
    const Tensor& p = t.value(out);
    for (std::size_t i = 0; i < 32; ++i)
        for (std::size_t j = 0; j < 32; ++j) EXPECT_DOUBLE_EQ(p.at(i, j), i == j ? 1.0 : 0.0);
}

TEST(Predictor, PermutationInvariant) {
    Rng rng(33);
    nets::TransformPredictor pred("mlp_c", rng);
    g4ds::testing::randomize(pred.parameters(), rng, 0.05);
    Tensor samples = random_full_rank_samples(60, 32, rng);
    Tensor shuffled = samples;
    // Reverse the rows.
    for (std::size_t i = 0; i < 60; ++i)
        for (std::size_t c = 0; c < 32; ++c) shuffled.at(i, c) = samples.at(59 - i, c);
    Tape t(false);
    const Tensor a = t.value(pred.forward(t, t.constant(samples)));
    const Tensor b = t.value(pred.forward(t, t.constant(shuffled)));
    EXPECT_LT(a.max_abs_diff(b), 1e-12);
}

TEST(CovarianceLossTape, MatchesPlainComputation) {
    Rng rng(34);
    Tensor a = random_full_rank_samples(50, 32, rng);
    Tensor b = random_full_rank_samples(70, 32, rng);
    Tensor mu_a = sample_mean(a), mu_b = sample_mean(b);
    Tensor ca({50, 32}), cb({70, 32});
    for (std::size_t i = 0; i < 50; ++i)
        for (std::size_t c = 0; c < 32; ++c) ca.at(i, c) = a.at(i, c) - mu_a[c];
    for (std::size_t i = 0; i < 70; ++i)
        for (std::size_t c = 0; c < 32; ++c) cb.at(i, c) = b.at(i, c) - mu_b[c];
    Tape t(false);
    const double tape_val = t.value(covariance_loss(t, t.constant(ca), t.constant(cb))).item();
    EXPECT_NEAR(tape_val, covariance_gap(ca, cb), 1e-12);
}
