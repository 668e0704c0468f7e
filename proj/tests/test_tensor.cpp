#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ptdx/common.hpp"
#include "ptdx/flops.hpp"
#include "ptdx/tensor.hpp"

#include "fd_util.hpp"

using ptdx::Shape;
using ptdx::Tensor;
using ptdx_test::check_grads;
using ptdx_test::random_tensor;

TEST_CASE("rng is deterministic and bounded") {
  ptdx::Rng a(123), b(123), c(124);
  for (int i = 0; i < 100; ++i) {
    const double ua = a.uniform();
    CHECK(ua == b.uniform());
    CHECK(ua >= 0.0);
    CHECK(ua < 1.0);
  }
  bool diverged = false;
  for (int i = 0; i < 10; ++i) diverged |= (a.uniform() != c.uniform());
  CHECK(diverged);
  ptdx::Rng d(7);
  for (int i = 0; i < 1000; ++i) {
    const double z = d.trunc_normal(0.02);
    CHECK(std::fabs(z) <= 0.04 + 1e-12);
  }
  CHECK(ptdx::derive_seed(1, 0) != ptdx::derive_seed(1, 1));
  CHECK(ptdx::derive_seed(1, 0) == ptdx::derive_seed(1, 0));
}

TEST_CASE("factories and element access") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.numel() == 6);
  CHECK(z.shape() == Shape{2, 3});
  Tensor f = Tensor::full({2, 2}, 1.5);
  for (double v : f.data()) CHECK(v == 1.5);
  Tensor s = Tensor::scalar(3.0);
  CHECK(s.ndim() == 0);
  CHECK(s.item() == 3.0);
  Tensor d = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  CHECK(d.at({1, 0}) == 3.0);
  CHECK(d.size(-1) == 2);
  CHECK_THROWS(Tensor::from_data({2, 2}, {1, 2, 3}));
}

TEST_CASE("add sub mul with broadcasting") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_data({2}, {10, 20});
  Tensor c = ptdx::add(a, b);
  CHECK(c.data() == std::vector<double>{11, 22, 13, 24});
  Tensor col = Tensor::from_data({2, 1}, {1, 2});
  Tensor row = Tensor::from_data({1, 3}, {1, 2, 3});
  Tensor outer = ptdx::mul(col, row);
  CHECK(outer.shape() == Shape{2, 3});
  CHECK(outer.data() == std::vector<double>{1, 2, 3, 2, 4, 6});
  Tensor d = ptdx::sub(a, Tensor::scalar(1.0));
  CHECK(d.data() == std::vector<double>{0, 1, 2, 3});
  CHECK_THROWS(ptdx::add(Tensor::zeros({3}), Tensor::zeros({4})));
}

TEST_CASE("scale and add_scalar") {
  Tensor a = Tensor::from_data({3}, {1, 2, 3});
  CHECK(ptdx::scale(a, 2.0).data() == std::vector<double>{2, 4, 6});
  CHECK(ptdx::add_scalar(a, -1.0).data() == std::vector<double>{0, 1, 2});
  CHECK((a * 2.0).data() == std::vector<double>{2, 4, 6});
  CHECK((a + a).data() == std::vector<double>{2, 4, 6});
  CHECK((a - a).data() == std::vector<double>{0, 0, 0});
}

TEST_CASE("matmul matches hand-computed values") {
  Tensor a = Tensor::from_data({1, 2}, {1, 2});
  Tensor b = Tensor::from_data({2, 1}, {3, 4});
  Tensor c = ptdx::matmul(a, b);
  CHECK(c.shape() == Shape{1, 1});
  CHECK(c.item() == 11.0);

  Tensor m = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor n = Tensor::from_data({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor p = ptdx::matmul(m, n);
  CHECK(p.data() == std::vector<double>{58, 64, 139, 154});

  // Batched with broadcast over the leading axis.
  Tensor batch = Tensor::from_data({2, 1, 2}, {1, 0, 0, 1});
  Tensor w = Tensor::from_data({2, 2}, {5, 6, 7, 8});
  Tensor out = ptdx::matmul(batch, w);
  CHECK(out.shape() == Shape{2, 1, 2});
  CHECK(out.data() == std::vector<double>{5, 6, 7, 8});

  CHECK_THROWS(ptdx::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})));
}

TEST_CASE("matmul flop accounting counts multiply-accumulates") {
  ptdx::FlopCounter counter;
  {
    ptdx::FlopTallyGuard guard(&counter);
    ptdx::FlopLabelGuard label("mm");
    ptdx::matmul(Tensor::zeros({4, 2, 3}), Tensor::zeros({3, 5}));
  }
  CHECK(counter.total() == 4 * 2 * 3 * 5);
  CHECK(counter.total_matching({"mm"}) == 4 * 2 * 3 * 5);
  CHECK(counter.total_matching({"absent"}) == 0);
  // Counting is scoped: nothing is recorded outside the guard.
  ptdx::matmul(Tensor::zeros({2, 2}), Tensor::zeros({2, 2}));
  CHECK(counter.total() == 4 * 2 * 3 * 5);
}

TEST_CASE("reshape permute transpose") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor r = ptdx::reshape(a, {3, 2});
  CHECK(r.data() == std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK_THROWS(ptdx::reshape(a, {4, 2}));

  Tensor t = ptdx::transpose_last2(a);
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t.data() == std::vector<double>{1, 4, 2, 5, 3, 6});

  Tensor cube = Tensor::from_data({2, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7});
  Tensor perm = ptdx::permute(cube, {2, 0, 1});
  CHECK(perm.shape() == Shape{2, 2, 2});
  // perm[i][j][k] = cube[j][k][i]
  CHECK(perm.data() == std::vector<double>{0, 2, 4, 6, 1, 3, 5, 7});
}

TEST_CASE("softmax matches hand-computed values") {
  Tensor x = Tensor::from_data({2}, {std::log(1.0), std::log(3.0)});
  Tensor y = ptdx::softmax(x, -1);
  CHECK(y.data()[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(y.data()[1] == doctest::Approx(0.75).epsilon(1e-12));

  // Rows sum to one and large offsets do not overflow.
  Tensor big = Tensor::from_data({1, 3}, {1000.0, 1000.0, 1000.0});
  Tensor yb = ptdx::softmax(big, -1);
  for (double v : yb.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  ptdx::Rng rng(5);
  Tensor r = random_tensor({3, 4, 5}, rng, 3.0);
  Tensor yr = ptdx::softmax(r, -1);
  for (int64_t row = 0; row < 12; ++row) {
    double s = 0;
    for (int64_t j = 0; j < 5; ++j) s += yr.data()[row * 5 + j];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Softmax along a non-terminal axis.
  Tensor m = Tensor::from_data({2, 2}, {std::log(1.0), std::log(2.0), std::log(3.0), std::log(6.0)});
  Tensor ym = ptdx::softmax(m, 0);
  CHECK(ym.data()[0] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(ym.data()[2] == doctest::Approx(0.75).epsilon(1e-9));

  Tensor bad = Tensor::from_data({2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(ptdx::softmax(bad, -1), std::invalid_argument);
}

TEST_CASE("layernorm normalizes rows") {
  Tensor x = Tensor::from_data({1, 2}, {1, 3});
  Tensor y = ptdx::layernorm(x, Tensor(), Tensor(), 1e-12);
  CHECK(y.data()[0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(y.data()[1] == doctest::Approx(1.0).epsilon(1e-6));

  // Affine path.
  Tensor gain = Tensor::from_data({2}, {2, 2});
  Tensor bias = Tensor::from_data({2}, {1, 1});
  Tensor ya = ptdx::layernorm(x, gain, bias, 1e-12);
  CHECK(ya.data()[0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(ya.data()[1] == doctest::Approx(3.0).epsilon(1e-6));

  ptdx::Rng rng(11);
  Tensor r = random_tensor({4, 7}, rng, 2.0);
  Tensor yn = ptdx::layernorm(r, Tensor(), Tensor(), 1e-6);
  for (int64_t row = 0; row < 4; ++row) {
    double mean = 0, var = 0;
    for (int64_t j = 0; j < 7; ++j) mean += yn.data()[row * 7 + j];
    mean /= 7;
    for (int64_t j = 0; j < 7; ++j) {
      const double d = yn.data()[row * 7 + j] - mean;
      var += d * d;
    }
    var /= 7;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("activation values") {
  Tensor x = Tensor::from_data({3}, {-1.0, 0.0, 1.0});
  Tensor g = ptdx::gelu(x);
  CHECK(g.data()[1] == 0.0);
  CHECK(g.data()[2] == doctest::Approx(0.841192).epsilon(1e-5));
  CHECK(g.data()[0] == doctest::Approx(-0.158808).epsilon(1e-4));
  Tensor s = ptdx::silu(x);
  CHECK(s.data()[1] == 0.0);
  CHECK(s.data()[2] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("reductions") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  CHECK(ptdx::sum_all(a).item() == 10.0);
  CHECK(ptdx::mean_all(a).item() == 2.5);
  Tensor m0 = ptdx::mean_axis(a, 0);
  CHECK(m0.shape() == Shape{2});
  CHECK(m0.data() == std::vector<double>{2, 3});
  Tensor m1 = ptdx::mean_axis(a, 1);
  CHECK(m1.data() == std::vector<double>{1.5, 3.5});
  Tensor b = Tensor::from_data({2, 2}, {1, 2, 3, 5});
  CHECK(ptdx::mse_loss(a, b).item() == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS(ptdx::mse_loss(a, Tensor::zeros({3})));
}

TEST_CASE("slice_last and embedding_lookup") {
  Tensor a = Tensor::from_data({2, 4}, {0, 1, 2, 3, 4, 5, 6, 7});
  Tensor s = ptdx::slice_last(a, 1, 2);
  CHECK(s.shape() == Shape{2, 2});
  CHECK(s.data() == std::vector<double>{1, 2, 5, 6});
  CHECK_THROWS(ptdx::slice_last(a, 3, 2));
  CHECK_THROWS(ptdx::slice_last(a, 0, 5));

  Tensor table = Tensor::from_data({3, 2}, {0, 1, 10, 11, 20, 21});
  Tensor e = ptdx::embedding_lookup(table, {2, 0});
  CHECK(e.shape() == Shape{2, 2});
  CHECK(e.data() == std::vector<double>{20, 21, 0, 1});
  CHECK_THROWS(ptdx::embedding_lookup(table, {3}));
}

TEST_CASE("roll_axes shifts cyclically") {
  Tensor a = Tensor::from_data({4}, {0, 1, 2, 3});
  Tensor r = ptdx::roll_axes(a, {0}, {1});
  CHECK(r.data() == std::vector<double>{3, 0, 1, 2});
  Tensor l = ptdx::roll_axes(a, {0}, {-1});
  CHECK(l.data() == std::vector<double>{1, 2, 3, 0});

  Tensor grid = Tensor::from_data({2, 3}, {0, 1, 2, 3, 4, 5});
  Tensor g = ptdx::roll_axes(grid, {0, 1}, {1, 1});
  CHECK(g.data() == std::vector<double>{5, 3, 4, 2, 0, 1});
  // Rolling by the extent is the identity.
  Tensor full = ptdx::roll_axes(grid, {0, 1}, {2, 3});
  CHECK(full.data() == grid.data());
  CHECK_THROWS(ptdx::roll_axes(grid, {0, 0}, {1, 1}));
}

TEST_CASE("interp_linear_axis endpoint-aligned values") {
  Tensor a = Tensor::from_data({2}, {0, 2});
  Tensor up = ptdx::interp_linear_axis(a, 0, 4);
  CHECK(up.data()[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(up.data()[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(up.data()[2] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(up.data()[3] == doctest::Approx(2.0).epsilon(1e-12));

  // Constant inputs stay exactly constant.
  Tensor c = Tensor::full({3}, 0.7);
  Tensor uc = ptdx::interp_linear_axis(c, 0, 9);
  for (double v : uc.data()) CHECK(v == 0.7);

  // Same-size interpolation is the identity, bit for bit.
  ptdx::Rng rng(3);
  Tensor r = random_tensor({5}, rng);
  Tensor ur = ptdx::interp_linear_axis(r, 0, 5);
  CHECK(ur.data() == r.data());

  // Singleton source broadcasts its value.
  Tensor one = Tensor::from_data({1}, {4.0});
  Tensor uo = ptdx::interp_linear_axis(one, 0, 3);
  CHECK(uo.data() == std::vector<double>{4, 4, 4});

  // Interior axis of a multi-axis tensor.
  Tensor grid = Tensor::from_data({2, 2}, {0, 10, 2, 12});
  Tensor ug = ptdx::interp_linear_axis(grid, 0, 3);
  CHECK(ug.shape() == Shape{3, 2});
  CHECK(ug.data()[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ug.data()[3] == doctest::Approx(11.0).epsilon(1e-12));
}

TEST_CASE("backward through simple graphs") {
  Tensor w = Tensor::from_data({3}, {1, 2, 3});
  w.set_requires_grad(true);
  Tensor x = Tensor::from_data({3}, {4, 5, 6});
  Tensor loss = ptdx::sum_all(ptdx::mul(w, x));
  loss.backward();
  CHECK(w.grad() == std::vector<double>{4, 5, 6});

  // Grads accumulate across backward calls until zeroed.
  Tensor loss2 = ptdx::sum_all(ptdx::mul(w, x));
  loss2.backward();
  CHECK(w.grad() == std::vector<double>{8, 10, 12});
  w.zero_grad();
  CHECK(w.grad() == std::vector<double>{0, 0, 0});

  // A leaf used twice gets both contributions.
  Tensor y = ptdx::sum_all(ptdx::add(ptdx::mul(w, w), w));
  y.backward();
  CHECK(w.grad() == std::vector<double>{3, 5, 7});

  CHECK_THROWS(ptdx::mul(w, x).backward());
}

TEST_CASE("broadcast backward reduces to leaf shape") {
  Tensor b = Tensor::from_data({2}, {1, 2});
  b.set_requires_grad(true);
  Tensor a = Tensor::full({3, 2}, 1.0);
  Tensor loss = ptdx::sum_all(ptdx::add(a, b));
  loss.backward();
  CHECK(b.grad() == std::vector<double>{3, 3});
}

TEST_CASE("no_grad suppresses graph construction") {
  Tensor w = Tensor::from_data({2}, {1, 2});
  w.set_requires_grad(true);
  {
    ptdx::NoGradGuard guard;
    Tensor y = ptdx::mul(w, w);
    CHECK_FALSE(y.requires_grad());
  }
  Tensor z = ptdx::sum_all(ptdx::mul(w, w));
  z.backward();
  CHECK(w.grad() == std::vector<double>{2, 4});
}

TEST_CASE("finite difference checks for every op") {
  ptdx::Rng rng(42);

  {
    Tensor a = random_tensor({2, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    check_grads([&] { return ptdx::sum_all(ptdx::mul(ptdx::add(a, b), ptdx::sub(a, b))); },
                {a, b}, "add/sub/mul broadcast");
  }
  {
    Tensor a = random_tensor({2, 3}, rng);
    Tensor b = random_tensor({3, 4}, rng);
    check_grads([&] { return ptdx::sum_all(ptdx::matmul(a, b)); }, {a, b}, "matmul");
  }
  {
    Tensor a = random_tensor({2, 2, 3}, rng);
    Tensor b = random_tensor({3, 2}, rng);
    check_grads([&] { return ptdx::mean_all(ptdx::matmul(a, b)); }, {a, b}, "batched matmul");
  }
  {
    Tensor a = random_tensor({3, 4}, rng);
    check_grads([&] { return ptdx::sum_all(ptdx::mul(ptdx::softmax(a, -1), a)); },
                {a}, "softmax");
  }
  {
    Tensor a = random_tensor({2, 5}, rng);
    Tensor gain = random_tensor({5}, rng);
    Tensor bias = random_tensor({5}, rng);
    check_grads([&] { return ptdx::sum_all(ptdx::mul(ptdx::layernorm(a, gain, bias, 1e-6), a)); },
                {a, gain, bias}, "layernorm affine");
  }
  {
    Tensor a = random_tensor({2, 5}, rng);
    check_grads([&] { return ptdx::sum_all(ptdx::mul(ptdx::layernorm(a, Tensor(), Tensor(), 1e-6), a)); },
                {a}, "layernorm plain");
  }
  {
    Tensor a = random_tensor({7}, rng);
    check_grads([&] { return ptdx::sum_all(ptdx::gelu(a)); }, {a}, "gelu");
    check_grads([&] { return ptdx::sum_all(ptdx::silu(a)); }, {a}, "silu");
  }
  {
    Tensor a = random_tensor({2, 3}, rng);
    check_grads([&] { return ptdx::mean_all(ptdx::reshape(a, {6})); }, {a}, "reshape");
    check_grads([&] { return ptdx::sum_all(ptdx::mul(ptdx::transpose_last2(a), ptdx::transpose_last2(a))); },
                {a}, "transpose");
  }
  {
    Tensor a = random_tensor({2, 3, 4}, rng);
    check_grads([&] {
      Tensor p = ptdx::permute(a, {2, 0, 1});
      return ptdx::sum_all(ptdx::mul(p, p));
    }, {a}, "permute");
  }
  {
    Tensor a = random_tensor({2, 6}, rng);
    check_grads([&] {
      Tensor s = ptdx::slice_last(a, 1, 4);
      return ptdx::sum_all(ptdx::mul(s, s));
    }, {a}, "slice_last");
  }
  {
    Tensor a = random_tensor({3, 4}, rng);
    check_grads([&] {
      Tensor r = ptdx::roll_axes(a, {0, 1}, {1, -2});
      return ptdx::sum_all(ptdx::mul(r, a));
    }, {a}, "roll_axes");
  }
  {
    Tensor a = random_tensor({3, 2}, rng);
    check_grads([&] {
      Tensor u = ptdx::interp_linear_axis(a, 0, 5);
      return ptdx::sum_all(ptdx::mul(u, u));
    }, {a}, "interp up");
    check_grads([&] {
      Tensor dwm = ptdx::interp_linear_axis(a, 0, 2);
      return ptdx::sum_all(ptdx::mul(dwm, dwm));
    }, {a}, "interp down");
  }
  {
    Tensor a = random_tensor({4, 3}, rng);
    check_grads([&] {
      Tensor m = ptdx::mean_axis(a, 0);
      return ptdx::sum_all(ptdx::mul(m, m));
    }, {a}, "mean_axis");
  }
  {
    Tensor table = random_tensor({5, 3}, rng);
    check_grads([&] {
      Tensor e = ptdx::embedding_lookup(table, {1, 4, 1});
      return ptdx::sum_all(ptdx::mul(e, e));
    }, {table}, "embedding_lookup");
  }
  {
    Tensor a = random_tensor({2, 3}, rng);
    Tensor b = random_tensor({2, 3}, rng);
    check_grads([&] { return ptdx::mse_loss(a, b); }, {a, b}, "mse_loss");
  }
  {
    Tensor a = random_tensor({4}, rng);
    check_grads([&] { return ptdx::mean_all(ptdx::scale(ptdx::add_scalar(a, 0.5), 3.0)); },
                {a}, "scale/add_scalar");
  }
}
