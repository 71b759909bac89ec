#include <gtest/gtest.h>

#include "fd_check.hpp"
#include "g4ds/core/conv.hpp"
#include "g4ds/core/rng.hpp"
#include "g4ds/core/tape.hpp"

using namespace g4ds;
using g4ds::testing::fd_check;

TEST(Tape, ForwardValues) {
    Tape t;
    Var a = t.constant(Tensor({2, 2}, {1, 2, 3, 4}));
    Var b = t.constant(Tensor({2, 2}, {5, 6, 7, 8}));
    EXPECT_DOUBLE_EQ(t.value(t.add(a, b)).at(0, 1), 8.0);
    EXPECT_DOUBLE_EQ(t.value(t.sub(a, b)).at(1, 0), -4.0);
    EXPECT_DOUBLE_EQ(t.value(t.mul(a, b)).at(1, 1), 32.0);
    EXPECT_DOUBLE_EQ(t.value(t.matmul(a, b)).at(0, 0), 19.0);
    EXPECT_DOUBLE_EQ(t.value(t.mean(a)).item(), 2.5);
}

TEST(Tape, ZeroGradOnConstantLoss) {
    Parameter p("p", Tensor({3}, {1.0, 2.0, 3.0}));
    Tape t;
    (void)t.param(p);
    Var c = t.constant(Tensor::scalar(7.0));
    t.backward(c);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(p.grad[i], 0.0);
}

TEST(Tape, ElementwiseGradients) {
    Rng rng(11);
    Parameter a("a", Tensor::randn({4, 3}, rng));
    Parameter b("b", Tensor::randn({4, 3}, rng));
    auto rep = fd_check({&a, &b}, [&](Tape& t) {
        Var va = t.param(a);
        Var vb = t.param(b);
        Var x = t.mul(t.add(va, vb), t.sub(va, vb));
        x = t.add(x, t.sigmoid(va));
        x = t.add(x, t.relu(vb));
        return t.mean(t.mul(x, x));
    });
    EXPECT_LT(rep.max_rel_err, 1e-7);
}

TEST(Tape, MatmulVariantsGradients) {
    Rng rng(12);
    Parameter a("a", Tensor::randn({3, 4}, rng));
    Parameter b("b", Tensor::randn({4, 2}, rng));
    Parameter c("c", Tensor::randn({2, 4}, rng));
    auto rep = fd_check({&a, &b, &c}, [&](Tape& t) {
        Var va = t.param(a);
        Var vb = t.param(b);
        Var vc = t.param(c);
        Var m1 = t.matmul(va, vb);        // {3,2}
        Var m2 = t.matmul_nt(va, vc);     // {3,2}
        Var m3 = t.matmul_tn(vb, vb);     // {2,2}
        Var s = t.add(m1, m2);
        return t.add(t.mean(t.mul(s, s)), t.mean(m3));
    });
    EXPECT_LT(rep.max_rel_err, 1e-7);
}

TEST(Tape, ReductionAndBroadcastGradients) {
    Rng rng(13);
    Parameter a("a", Tensor::randn({5, 3}, rng));
    Parameter v("v", Tensor::randn({3}, rng));
    auto rep = fd_check({&a, &v}, [&](Tape& t) {
        Var va = t.param(a);
        Var vv = t.param(v);
        Var centered = t.sub_rowvec(va, t.mean_rows(va));
        Var y = t.add_rowvec(centered, vv);
        Var n = t.normalize_rows(y);
        return t.mse(n, t.constant(Tensor::full({5, 3}, 0.1)));
    });
    EXPECT_LT(rep.max_rel_err, 1e-6);
}

TEST(Tape, SoftmaxChannelsGradient) {
    Rng rng(14);
    Parameter a("a", Tensor::randn({4, 3, 2}, rng));
    auto rep = fd_check({&a}, [&](Tape& t) {
        Var va = t.param(a);
        Var s = t.softmax_channels(va);
        Var w = t.constant(Tensor::randn({4, 3, 2}, rng = Rng(99), 1.0));
        return t.mean(t.mul(s, w));
    });
    EXPECT_LT(rep.max_rel_err, 1e-6);
}

TEST(Tape, SoftmaxChannelsSumsToOne) {
    Rng rng(15);
    Tape t;
    Var s = t.softmax_channels(t.constant(Tensor::randn({9, 4, 4}, rng, 3.0)));
    const Tensor& v = t.value(s);
    for (std::size_t i = 0; i < 16; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < 9; ++c) acc += v[c * 16 + i];
        EXPECT_NEAR(acc, 1.0, 1e-12);
    }
}

TEST(Tape, StructuralGradients) {
    Rng rng(16);
    Parameter a("a", Tensor::randn({4, 6}, rng));
    Parameter b("b", Tensor::randn({2, 3, 5}, rng));
    auto rep = fd_check({&a, &b}, [&](Tape& t) {
        Var va = t.param(a);
        Var vb = t.param(b);
        Var left = t.slice_cols(va, 0, 2);
        Var right = t.slice_cols(va, 2, 6);
        Var cat = t.concat_cols(right, left);
        Var chw = t.hwc_to_chw(t.reshape(cat, {2, 2, 6}));
        Var hwc = t.chw_to_hwc(t.concat_channels(vb, t.slice_channels(vb, 0, 1)));
        return t.add(t.mean(t.mul(chw, chw)), t.mean(t.mul(hwc, hwc)));
    });
    EXPECT_LT(rep.max_rel_err, 1e-6);
}

TEST(Conv, MatchesDirectSum) {
    // 1x1 input channel, known kernel: compare against a hand summation.
    Tape t;
    Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor w({1, 1, 3, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0}); // identity kernel
    Tensor b({1}, {0.5});
    Var y = conv2d(t, t.constant(x), t.constant(w), t.constant(b), 1, 1);
    const Tensor& vy = t.value(y);
    ASSERT_EQ(vy.dim(1), 3u);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(vy[i], x[i] + 0.5);
}

TEST(Conv, GradientsStride1And2) {
    Rng rng(17);
    for (int stride : {1, 2}) {
        Parameter x("x", Tensor::randn({2, 5, 5}, rng));
        Parameter w("w", Tensor::randn({3, 2, 3, 3}, rng, 0.5));
        Parameter b("b", Tensor::randn({3}, rng, 0.1));
        auto rep = fd_check({&x, &w, &b}, [&](Tape& t) {
            Var y = conv2d(t, t.param(x), t.param(w), t.param(b), stride, 1);
            return t.mean(t.mul(y, y));
        });
        EXPECT_LT(rep.max_rel_err, 1e-6) << "stride " << stride;
    }
}

TEST(Conv, PadAndSliceGradients) {
    Rng rng(18);
    Parameter x("x", Tensor::randn({2, 4, 4}, rng));
    auto rep = fd_check({&x}, [&](Tape& t) {
        Var p = replicate_pad(t, t.param(x), 1);
        Var s = slice_spatial(t, p, 0, 2, 4, 4);
        return t.mean(t.mul(s, s));
    });
    EXPECT_LT(rep.max_rel_err, 1e-7);
}

TEST(Tape, GradDisabledSkipsClosures) {
    Tape t(false);
    Var a = t.constant(Tensor({2}, {1, 2}));
    Var b = t.relu(a);
    EXPECT_DOUBLE_EQ(t.value(b)[1], 2.0);
    EXPECT_THROW(t.backward(t.mean(b)), std::logic_error);
}
