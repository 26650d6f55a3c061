#include <doctest.h>

#include "fscil/optim.hpp"

using namespace fscil;

TEST_CASE("single step without momentum") {
  Parameter p("p", Tensor::scalar(1.0), ParamGroup::fast);
  p.grad[0] = 2.0;
  SgdOptimizer opt;
  opt.step({&p}, 0.1, 0.5, 0.0);
  CHECK(p.value[0] == 1.0 - 0.1 * 2.0);
  CHECK(p.grad[0] == 0.0);
}

TEST_CASE("groups pick their own learning rate") {
  Parameter fast("f", Tensor::scalar(1.0), ParamGroup::fast);
  Parameter slow("s", Tensor::scalar(1.0), ParamGroup::slow);
  Parameter frozen("z", Tensor::scalar(1.0), ParamGroup::frozen);
  fast.grad[0] = slow.grad[0] = frozen.grad[0] = 1.0;
  SgdOptimizer opt;
  opt.step({&fast, &slow, &frozen}, 0.1, 0.001, 0.0);
  CHECK(fast.value[0] == 1.0 - 0.1);
  CHECK(slow.value[0] == 1.0 - 0.001);
  CHECK(frozen.value[0] == 1.0);
  CHECK(frozen.grad[0] == 1.0);  // frozen parameters are left entirely alone
}

TEST_CASE("momentum accumulates velocity across steps") {
  Parameter p("p", Tensor::scalar(1.0), ParamGroup::fast);
  SgdOptimizer opt;
  p.grad[0] = 2.0;
  opt.step({&p}, 0.1, 0.1, 0.9);
  double v = 2.0;
  double expected = 1.0 - 0.1 * v;
  CHECK(p.value[0] == expected);
  p.grad[0] = 2.0;
  opt.step({&p}, 0.1, 0.1, 0.9);
  v = 0.9 * v + 2.0;
  expected -= 0.1 * v;
  CHECK(p.value[0] == expected);
}

TEST_CASE("velocity is tracked per parameter") {
  Parameter a("a", Tensor::scalar(0.0), ParamGroup::fast);
  Parameter b("b", Tensor::scalar(0.0), ParamGroup::fast);
  SgdOptimizer opt;
  a.grad[0] = 1.0;
  b.grad[0] = 0.0;
  opt.step({&a, &b}, 1.0, 1.0, 0.9);
  a.grad[0] = 0.0;
  b.grad[0] = 0.0;
  opt.step({&a, &b}, 1.0, 1.0, 0.9);
  CHECK(a.value[0] == -1.0 - 0.9);  // momentum keeps a moving
  CHECK(b.value[0] == 0.0);         // b never received a gradient
}

TEST_CASE("invalid settings and shape changes are rejected") {
  Parameter p("p", Tensor::scalar(1.0), ParamGroup::fast);
  SgdOptimizer opt;
  CHECK_THROWS_AS(opt.step({&p}, -0.1, 0.1, 0.0), ConfigError);
  CHECK_THROWS_AS(opt.step({&p}, 0.1, 0.1, 1.0), ConfigError);
  opt.step({&p}, 0.1, 0.1, 0.5);
  p.value = Tensor({2});
  p.grad = Tensor({2});
  CHECK_THROWS_AS(opt.step({&p}, 0.1, 0.1, 0.5), ContractViolation);
}
