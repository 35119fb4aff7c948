#include <doctest.h>

#include "xview/rng.hpp"
#include "xview/tensor.hpp"

using namespace xview;
using namespace xview::num;

TEST_CASE("matmul variants agree with hand results") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor c = t_matmul(a, b);
  CHECK(c.shape == std::vector<int>{2, 2});
  CHECK(c.at(0, 0) == doctest::Approx(58));
  CHECK(c.at(0, 1) == doctest::Approx(64));
  CHECK(c.at(1, 0) == doctest::Approx(139));
  CHECK(c.at(1, 1) == doctest::Approx(154));

  // (A B)^T = B^T A^T via the transpose flags
  Tensor ct = t_matmul(b, a, true, true);
  CHECK(ct.at(0, 0) == doctest::Approx(58));
  CHECK(ct.at(0, 1) == doctest::Approx(139));
  CHECK(ct.at(1, 0) == doctest::Approx(64));
  CHECK(ct.at(1, 1) == doctest::Approx(154));

  Tensor nt = t_matmul(a, Tensor({2, 3}, {7, 9, 11, 8, 10, 12}), false, true);
  CHECK(nt.at(0, 0) == doctest::Approx(58));
  CHECK(nt.at(1, 1) == doctest::Approx(154));
}

TEST_CASE("matmul rejects mismatched inner dims") {
  Tensor a({2, 3});
  Tensor b({2, 2});
  CHECK_THROWS_AS(t_matmul(a, b), ShapeError);
}

TEST_CASE("rng is deterministic and in range") {
  Rng r1(42), r2(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(r1.next() == r2.next());
  }
  Rng r3(7);
  for (int i = 0; i < 1000; ++i) {
    double u = r3.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r3.below(10) < 10);
  }
}

TEST_CASE("rng state round-trips") {
  Rng r(123);
  for (int i = 0; i < 5; ++i) r.next();
  auto st = r.state();
  Rng r2(0);
  r2.set_state(st);
  for (int i = 0; i < 20; ++i) CHECK(r.next() == r2.next());
}
