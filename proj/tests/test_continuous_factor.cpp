#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "idfact/continuous_factor.hpp"
#include "idfact/ensemble.hpp"
#include "oracles.hpp"

using namespace idfact;

namespace {

SparseMatrix sparse_identity(Index n) {
  SparseMatrix s(n, n);
  s.setIdentity();
  return s;
}

// Identity frames at t = 0 and 1/2; on the last segment column 1 turns by
// phi towards e_0, so <a_0, a_1> grows linearly.  Scaled to norm one.
constexpr Index kTurnN = 32768;
const double kTurnPhi = std::numbers::pi / 18.0;

std::shared_ptr<const MatrixPath<SparseMatrix>> turning_path() {
  const SparseMatrix eye = sparse_identity(kTurnN);
  SparseMatrix last = eye;
  last.coeffRef(1, 1) = std::cos(kTurnPhi);
  last.coeffRef(0, 1) = std::sin(kTurnPhi);
  last.makeCompressed();
  const double scale = 1.0 / std::sqrt(1.0 + std::sin(kTurnPhi));
  return std::make_shared<const MatrixPath<SparseMatrix>>(
      std::vector<double>{0.0, 0.5, 1.0},
      std::vector<SparseMatrix>{scale * eye, scale * eye, scale * last});
}

FactorPath<SparseMatrix> turning_plan() {
  PathFactorOptions opt;
  opt.n = 2;
  opt.force_rank = true;
  return plan_path(turning_path(), opt);
}

Matrix normalized_random(Index n, std::mt19937_64& rng) {
  Matrix a = gaussian_matrix(n, n, rng);
  return a / oracle::operator_norm(a);
}

}  // namespace

TEST(Blend, EndpointsAreTheStaticFactors) {
  std::mt19937_64 rng(71);
  const Matrix a = normalized_random(20, rng);
  const IndexSet f1{1, 5}, f2{2, 9};
  EXPECT_EQ(blend_R(a, f1, f2, 1.0), build_R(a, f1));
  EXPECT_EQ(blend_R(a, f1, f2, 0.0), build_R(a, f2));
  EXPECT_EQ(blend_L(a, f1, f2, 1.0), build_L(a, f1));
  EXPECT_EQ(blend_L(a, f1, f2, 0.0), build_L(a, f2));
}

TEST(Blend, HalfwayOnIdentity) {
  const Matrix r = blend_R(identity(6), IndexSet{0, 1}, IndexSet{2, 3}, 0.5);
  Matrix expect = Matrix::Zero(6, 2);
  expect(0, 0) = expect(2, 0) = expect(1, 1) = expect(3, 1) = std::sqrt(0.5);
  EXPECT_LE((r - expect).cwiseAbs().maxCoeff(), 1e-16);
  EXPECT_LE((blend_L(identity(6), IndexSet{0, 1}, IndexSet{2, 3}, 0.5) - expect.transpose()).cwiseAbs().maxCoeff(),
            1e-16);
}

TEST(Blend, ArgumentChecks) {
  const Matrix a = identity(6);
  EXPECT_THROW(blend_R(a, IndexSet{0, 1}, IndexSet{1, 2}, 0.5), DimensionError);
  EXPECT_THROW(blend_R(a, IndexSet{0, 1}, IndexSet{2}, 0.5), DimensionError);
  EXPECT_THROW(blend_R(a, IndexSet{}, IndexSet{}, 0.5), DimensionError);
  EXPECT_THROW(blend_R(a, IndexSet{0}, IndexSet{6}, 0.5), DimensionError);
  EXPECT_THROW(blend_R(a, IndexSet{0}, IndexSet{1}, 1.5), std::invalid_argument);
  EXPECT_THROW(blend_L(a, IndexSet{0}, IndexSet{1}, -0.1), std::invalid_argument);
}

TEST(BlendEstimates, Examples) {
  const FactorEstimates e = blend_estimates(identity(6), IndexSet{0, 1}, IndexSet{2, 3});
  EXPECT_EQ(e.right_bound, 1.0);
  EXPECT_EQ(e.left_bound, 1.0);
  EXPECT_EQ(e.deviation_bound, 0.0);
  const FactorEstimates f = blend_estimates_from(0.5, 0.01, 2);
  EXPECT_DOUBLE_EQ(f.right_bound, 2.0);
  EXPECT_DOUBLE_EQ(f.left_bound, 1.4);
  EXPECT_DOUBLE_EQ(f.deviation_bound, 0.16);
}

TEST(BlendEstimates, DominateAcrossLambdaSweep) {
  std::mt19937_64 rng(72);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = normalized_random(40, rng);
    const IndexSet f1{0, 3, 17}, f2{5, 22, 39};
    const FactorEstimates e = blend_estimates(a, f1, f2);
    const auto st = oracle::gram_stats(a, f1.united(f2).indices());
    const double col_dev = st.small_lambda / (st.theta * st.theta);
    for (int k = 0; k <= 100; ++k) {
      const double lambda = k / 100.0;
      const Matrix r = blend_R(a, f1, f2, lambda);
      const Matrix l = blend_L(a, f1, f2, lambda);
      const Matrix b = a * r;
      EXPECT_LE(oracle::operator_norm(r), e.right_bound * (1 + 1e-12));
      EXPECT_LE(oracle::operator_norm(l), e.left_bound * (1 + 1e-12));
      EXPECT_LE(oracle::operator_norm(l * a * r - identity(3)), e.deviation_bound * (1 + 1e-12) + 1e-15);
      for (Index p = 0; p < 3; ++p) {
        EXPECT_LE(std::abs(b.col(p).squaredNorm() - 1.0), col_dev * (1 + 1e-12) + 1e-15);
        for (Index q = p + 1; q < 3; ++q) EXPECT_LE(std::abs(b.col(p).dot(b.col(q))), 2 * col_dev * (1 + 1e-12));
      }
    }
  }
}

TEST(Locate, PhasesAndTentValues) {
  CoverPlan plan;
  plan.n = 1;
  plan.nodes = {0.0, 1.0, 2.0};
  plan.families = {IndexSet{0}, IndexSet{1}};
  plan.bridges = {IndexSet{2}};
  plan.windows = {{0.5, 1.25}};
  EXPECT_EQ(locate(plan, 0.2).phase, Phase::A);
  EXPECT_EQ(locate(plan, 0.2).family, 0);
  EXPECT_EQ(locate(plan, 1.5).family, 1);
  const Region s = locate(plan, 0.5);
  EXPECT_EQ(s.phase, Phase::B);
  EXPECT_EQ(s.lambda, 1.0);
  EXPECT_EQ(locate(plan, 0.75).lambda, 0.5);
  EXPECT_EQ(locate(plan, 1.0).phase, Phase::B);
  EXPECT_EQ(locate(plan, 1.0).lambda, 0.0);
  const Region c = locate(plan, 1.125);
  EXPECT_EQ(c.phase, Phase::C);
  EXPECT_EQ(c.node, 1);
  EXPECT_EQ(c.lambda, 0.5);
  EXPECT_EQ(locate(plan, 1.25).lambda, 1.0);
  EXPECT_THROW(locate(plan, 2.5), std::out_of_range);
}

TEST(BuildCover, ConstantIdentitySingleInterval) {
  const auto path = constant_path(sparse_identity(1000), 3);
  CoverPlan plan;
  build_cover(path, 2, 0.1, plan);
  EXPECT_EQ(plan.intervals(), 1);
  EXPECT_EQ(plan.families[0], IndexSet({0, 1}));
  EXPECT_EQ(plan.nodes, std::vector<double>({0.0, 1.0}));
}

TEST(BuildBridges, SplitIdentityUsesFullWindows) {
  const auto path = constant_path(sparse_identity(1000), 2);
  CoverPlan plan;
  plan.n = 2;
  plan.epsilon = 0.3;
  plan.nodes = {0.0, 0.5, 1.0};
  plan.families = {IndexSet{0, 1}, IndexSet{2, 3}};
  build_bridges(path, plan);
  ASSERT_EQ(plan.bridges.size(), 1u);
  EXPECT_EQ(plan.bridges[0], IndexSet({4, 5}));
  EXPECT_DOUBLE_EQ(plan.windows[0].first, 0.5 - 0.45 * 0.5);
  EXPECT_DOUBLE_EQ(plan.windows[0].second, 0.5 + 0.45 * 0.5);
}

TEST(BuildBridges, NoThresholdBelowEpsilon) {
  const auto path = constant_path(sparse_identity(100), 2);
  CoverPlan plan;
  plan.n = 2;
  plan.epsilon = 0.3;  // sqrt(5n/N) = 0.316
  plan.nodes = {0.0, 0.5, 1.0};
  plan.families = {IndexSet{0, 1}, IndexSet{2, 3}};
  EXPECT_THROW(build_bridges(path, plan), InfeasibleError);
}

TEST(TurningPath, NodeMatchesClosedForm) {
  // On the last segment <a_0, a_1> = s sin(phi) / (1 + sin(phi)) and the
  // smallest column norm is cos(phi/2) / (1 + sin(phi))^{1/2} at s = 1/2,
  // so the family {1,2} reaches eps = theta^2/36 at
  //   s* = cos^2(phi/2) / (36 sin(phi)).
  const FactorPath<SparseMatrix> fp = turning_plan();
  const double c = std::cos(kTurnPhi / 2);
  const double s_star = c * c / (36.0 * std::sin(kTurnPhi));
  const double node = 0.5 + 0.5 * s_star;
  ASSERT_EQ(fp.plan.intervals(), 2);
  EXPECT_NEAR(fp.plan.theta, 0.919549815588640005881563649062, 1e-12);
  EXPECT_NEAR(fp.plan.epsilon, 0.0234881073152528289546244052037, 1e-12);
  // 30-digit value of the same node
  EXPECT_NEAR(node, 0.579375363213620437966742052425, 1e-14);
  EXPECT_NEAR(fp.plan.nodes[1], node, 1e-6);
  EXPECT_LE(fp.plan.nodes[1], node);
  EXPECT_EQ(fp.plan.families[0], IndexSet({0, 1}));
  EXPECT_EQ(fp.plan.families[1], IndexSet({0, 2}));
  EXPECT_EQ(fp.plan.bridges[0], IndexSet({3, 4}));
}

TEST(TurningPath, WindowsTakeTheAllowedShare) {
  const FactorPath<SparseMatrix> fp = turning_plan();
  const double t1 = fp.plan.nodes[1];
  EXPECT_NEAR(fp.plan.windows[0].first, t1 - 0.45 * t1, 1e-15);
  EXPECT_NEAR(fp.plan.windows[0].second, t1 + 0.45 * (1.0 - t1), 1e-15);
  EXPECT_NEAR(fp.plan.windows[0].first, 0.318656449767491240881708128834, 1e-6);
  const PlanCheck pc = check_plan(*fp.path, fp.plan);
  EXPECT_TRUE(pc.ok) << pc.reason;
}

TEST(TurningPath, CaseFormulasStitch) {
  const FactorPath<SparseMatrix> fp = turning_plan();
  EXPECT_LE(stitch_gap(fp.plan, *fp.path), 1e-12);
  const auto [s, u] = fp.plan.windows[0];
  const RawFactors at_s = fp.raw_at(s);
  EXPECT_EQ(at_s.right, build_R(fp.path->at(s), fp.plan.families[0]));
  const RawFactors at_t = fp.raw_at(fp.plan.nodes[1]);
  EXPECT_EQ(at_t.right, build_R(fp.path->at(fp.plan.nodes[1]), fp.plan.bridges[0]));
  const RawFactors at_u = fp.raw_at(u);
  EXPECT_EQ(at_u.right, build_R(fp.path->at(u), fp.plan.families[1]));
}

TEST(TurningPath, CertificateWithinBudgets) {
  const FactorPath<SparseMatrix> fp = turning_plan();
  const PathCertificate c = verify_path(fp, 401);
  EXPECT_TRUE(c.pass) << c.reason;
  EXPECT_LE(c.max_dev, 1e-9);
  EXPECT_LE(c.max_product, 2.0 / c.theta + 1e-9);
  EXPECT_LE(c.max_raw_dev, kRawDeviationBudget);
  EXPECT_LE(c.max_raw_product, 4.0 / (3.0 * c.theta));
  EXPECT_EQ(c.intervals, 2);
}

TEST(TurningPath, PlanMutationsAreDetected) {
  const FactorPath<SparseMatrix> base = turning_plan();
  auto fails = [&](CoverPlan plan, const char* what) {
    FactorPath<SparseMatrix> fp{base.path, std::move(plan)};
    const PathCertificate c = verify_path(fp, 101);
    EXPECT_FALSE(c.pass) << what;
    EXPECT_FALSE(c.reason.empty()) << what;
    return c.reason;
  };
  {
    CoverPlan p = base.plan;
    p.families[1] = IndexSet{0, 1};
    EXPECT_NE(fails(p, "family").find("(b)"), std::string::npos);
  }
  {
    CoverPlan p = base.plan;
    p.bridges[0] = IndexSet{2, 3};
    fails(p, "bridge overlap");
  }
  {
    CoverPlan p = base.plan;
    p.bridges[0] = IndexSet{1, 3};
    fails(p, "bridge");
  }
  {
    CoverPlan p = base.plan;
    p.windows[0].second = 1.0;
    fails(p, "window");
  }
  {
    CoverPlan p = base.plan;
    p.nodes[1] = 0.9;
    fails(p, "node");
  }
  {
    CoverPlan p = base.plan;
    p.epsilon *= 2;
    fails(p, "epsilon");
  }
  {
    CoverPlan p = base.plan;
    p.theta = 1.0;
    fails(p, "theta");
  }
}

TEST(TurningPath, SampleMutationsAreDetected) {
  const FactorPath<SparseMatrix> fp = turning_plan();
  auto samples = critical_samples(fp);
  ASSERT_EQ(samples.size(), 5u);
  EXPECT_TRUE(verify_path(fp, 101, kDefaultTol, &samples).pass);
  samples[2].left(1, 3) += 1e-5;
  const PathCertificate c = verify_path(fp, 101, kDefaultTol, &samples);
  EXPECT_FALSE(c.samples_ok);
  EXPECT_FALSE(c.pass);
}

TEST(FactorPath, ConstantIdentityRankOne) {
  const auto path = std::make_shared<const MatrixPath<SparseMatrix>>(constant_path(sparse_identity(1728), 4));
  const auto [fp, cert] = factor_path(path, PathFactorOptions{.grid = 101});
  EXPECT_EQ(fp.n(), 1);
  EXPECT_TRUE(cert.pass);
  EXPECT_NEAR(cert.max_product, 1.0, 1e-15);
  EXPECT_LE(cert.max_jump, 1e-15);
  const PointFactors pf = fp.at(0.3);
  EXPECT_EQ(pf.left, pf.raw_left);
}

TEST(FactorPath, ConstantIdentityRankTwo) {
  const auto path = std::make_shared<const MatrixPath<SparseMatrix>>(constant_path(sparse_identity(13824), 2));
  const auto [fp, cert] = factor_path(path, PathFactorOptions{.grid = 51});
  EXPECT_EQ(fp.n(), 2);
  EXPECT_EQ(fp.plan.intervals(), 1);
  EXPECT_TRUE(cert.pass);
  EXPECT_EQ(cert.max_dev, 0.0);
  EXPECT_LE(cert.max_jump, 1e-15);
  const RawFactors raw = fp.raw_at(0.7);
  Matrix expect = Matrix::Zero(13824, 2);
  expect(0, 0) = expect(1, 1) = 1.0;
  EXPECT_EQ(raw.right, expect);
}

TEST(FactorPath, HypothesisFailures) {
  try {
    plan_path(std::make_shared<const MatrixPath<Matrix>>(constant_path(Matrix(2.0 * identity(4)))));
    FAIL();
  } catch (const HypothesisError& e) {
    EXPECT_NE(std::string(e.what()).find("(i)"), std::string::npos);
  }
  Matrix a0 = identity(4), a1 = identity(4);
  a1(0, 0) = -1.0;  // column 1 passes through zero
  try {
    plan_path(std::make_shared<const MatrixPath<Matrix>>(std::vector<double>{0.0, 1.0}, std::vector<Matrix>{a0, a1}));
    FAIL();
  } catch (const HypothesisError& e) {
    EXPECT_NE(std::string(e.what()).find("(ii)"), std::string::npos);
  }
  PathFactorOptions opt;
  opt.n = 2;
  EXPECT_THROW(plan_path(std::make_shared<const MatrixPath<Matrix>>(constant_path(identity(40))), opt),
               HypothesisError);
  opt.force_rank = true;
  EXPECT_THROW(plan_path(std::make_shared<const MatrixPath<Matrix>>(constant_path(identity(40))), opt),
               InfeasibleError);
}

TEST(FactorPath, RandomRotationPath) {
  std::mt19937_64 rng(73);
  const auto path = std::make_shared<const MatrixPath<SparseMatrix>>(rotation_path_sparse(32768, 0.9, 10, rng, 8));
  EXPECT_LE(path_norm_bound(*path), 1.0 + 1e-9);
  EXPECT_GE(path_theta(*path), 0.9 - 1e-9);
  const auto [fp, cert] = factor_path(path, PathFactorOptions{.grid = 501});
  EXPECT_EQ(fp.n(), 2);
  EXPECT_TRUE(cert.pass) << cert.reason;
  EXPECT_LE(cert.max_dev, 1e-8);
  EXPECT_LE(cert.max_product, 2.0 / cert.theta + 1e-9);
  EXPECT_LE(cert.max_raw_dev, kRawDeviationBudget);
  EXPECT_LE(cert.max_raw_product, 4.0 / (3.0 * cert.theta));
  EXPECT_LE(stitch_gap(fp.plan, *path), 1e-12);
  EXPECT_TRUE(check_plan(*path, fp.plan).ok);
  for (Index m = 1; m < fp.plan.intervals(); ++m) {
    const auto [s, u] = fp.plan.windows[m - 1];
    EXPECT_LT(fp.plan.nodes[m - 1], s);
    EXPECT_LT(s, fp.plan.nodes[m]);
    EXPECT_LT(fp.plan.nodes[m], u);
    EXPECT_LT(u, fp.plan.nodes[m + 1]);
  }
}

TEST(VerificationGrid, ContainsStructuralPoints) {
  const FactorPath<SparseMatrix> fp = turning_plan();
  const auto g = verification_grid(*fp.path, fp.plan, 11);
  for (double t : {fp.plan.nodes[1], fp.plan.windows[0].first, fp.plan.windows[0].second, 0.5})
    EXPECT_TRUE(std::binary_search(g.begin(), g.end(), t));
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
  EXPECT_THROW(verification_grid(*fp.path, fp.plan, 1), std::invalid_argument);
}
