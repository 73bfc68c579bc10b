#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fd.h"
#include "musgae/classifier.h"
#include "musgae/errors.h"

using namespace musgae;

namespace {

FfnnParams<double> random_params(Rng& rng, int in, int h1, int h2, int c) {
  FfnnParams<double> p;
  p.W1 = fdcheck::random_matrix(in, h1, rng);
  p.b1 = fdcheck::random_matrix(1, h1, rng, 0.1);
  p.W2 = fdcheck::random_matrix(h1, h2, rng);
  p.b2 = fdcheck::random_matrix(1, h2, rng, 0.1);
  p.W3 = fdcheck::random_matrix(h2, c, rng);
  p.b3 = fdcheck::random_matrix(1, c, rng, 0.1);
  p.bn1 = BatchNorm<double>::identity(h1);
  p.bn2 = BatchNorm<double>::identity(h2);
  p.bn1.gamma = fdcheck::random_matrix(1, h1, rng).array() + 1.5;
  p.bn1.beta = fdcheck::random_matrix(1, h1, rng, 0.5);
  p.bn2.gamma = fdcheck::random_matrix(1, h2, rng).array() + 1.5;
  p.bn2.beta = fdcheck::random_matrix(1, h2, rng, 0.5);
  return p;
}

std::string checkpoint_bytes(const FfnnModel& m) {
  std::ostringstream out;
  save_ffnn(out, m);
  return out.str();
}

Matrix random_codes(Rng& rng, int n, int d) {
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform());
  return m;
}

}  // namespace

TEST_SUITE("classifier") {
  TEST_CASE("gradients match finite differences") {
    Rng rng(13);
    FfnnParams<double> p = random_params(rng, 6, 8, 4, 3);
    const MatrixD x = fdcheck::random_matrix(7, 6, rng);
    const std::vector<int> labels = {0, 2, 1, 1, 0, 2, 2};
    const MatrixD mask1 = dropout_mask<double>(7, 8, 0.25, rng);
    const MatrixD mask2 = dropout_mask<double>(7, 4, 0.25, rng);
    ClfConfig cfg;
    cfg.l2_coeff = 1e-2;
    cfg.lee_coeff = 0.1;
    cfg.lee_target = 0.3;
    const auto res = ffnn_loss_and_grads(p, x, labels, mask1, mask2, cfg);
    auto loss = [&] { return ffnn_loss_and_grads(p, x, labels, mask1, mask2, cfg).loss; };
    CHECK(fdcheck::max_rel_error(p.W1, res.grads.W1, loss) < 1e-4);
    CHECK(fdcheck::max_rel_error(p.W2, res.grads.W2, loss) < 1e-4);
    // Batch norm cancels any shift of its input, so the hidden biases have
    // an identically zero gradient; relative error is undefined there.
    CHECK(res.grads.b1.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(res.grads.b2.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(fdcheck::max_abs_numeric(p.b1, loss) < 1e-8);
    CHECK(fdcheck::max_abs_numeric(p.b2, loss) < 1e-8);
    CHECK(fdcheck::max_rel_error(p.W3, res.grads.W3, loss) < 1e-4);
    CHECK(fdcheck::max_rel_error(p.b3, res.grads.b3, loss) < 1e-4);
    CHECK(fdcheck::max_rel_error(p.bn1.gamma, res.grads.bn1.gamma, loss) < 1e-4);
    CHECK(fdcheck::max_rel_error(p.bn1.beta, res.grads.bn1.beta, loss) < 1e-4);
    CHECK(fdcheck::max_rel_error(p.bn2.gamma, res.grads.bn2.gamma, loss) < 1e-4);
    CHECK(fdcheck::max_rel_error(p.bn2.beta, res.grads.bn2.beta, loss) < 1e-4);
  }

  TEST_CASE("forward pass") {
    Rng rng(2);
    FfnnParams<double> p = random_params(rng, 6, 8, 4, 3);
    const MatrixD x = fdcheck::random_matrix(10, 6, rng, 50.0);
    Rng drop(1);
    const MatrixD train_probs = ffnn_forward(p, x, true, &drop, 0.5);
    const MatrixD probs = ffnn_forward(p, x, false, nullptr, 0.5);
    for (Eigen::Index r = 0; r < 10; ++r) {
      CHECK(std::abs(train_probs.row(r).sum() - 1.0) < 1e-10);
      CHECK(std::abs(probs.row(r).sum() - 1.0) < 1e-10);
    }
    CHECK(ffnn_forward(p, x, false, nullptr, 0.5) == probs);
    p.W3.setZero();
    p.b3.setZero();
    const MatrixD uniform = ffnn_forward(p, x, false, nullptr, 0.5);
    CHECK((uniform.array() - 1.0 / 3).abs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(ffnn_forward(p, MatrixD(MatrixD::Zero(2, 5)), false, nullptr, 0.5), std::invalid_argument);

    const FfnnModel model = init_ffnn(6, 16, 8, 4, 3);
    const Matrix codes = random_codes(rng, 5, 6);
    CHECK(forward(model, codes) == forward(model, codes));
  }

  TEST_CASE("argmax and rates") {
    Matrix probs(3, 3);
    probs << 0.2f, 0.5f, 0.3f, 0.4f, 0.4f, 0.2f, 0.1f, 0.1f, 0.8f;
    CHECK(argmax_rows(probs) == std::vector<int>{1, 0, 2});
    const Matrix shifted = (probs.array() + 3.0f).matrix();
    CHECK(argmax_rows(shifted) == argmax_rows(probs));
    const std::vector<int> t = {0, 1, 2, 3};
    CHECK(misclassification_rate(t, t) == 0.0);
    CHECK(misclassification_rate(std::vector<int>{1, 2, 3, 0}, t) == 100.0);
    CHECK(misclassification_rate(std::vector<int>{0, 2, 2, 0}, t) == 50.0);
    CHECK(misclassification_rate(std::vector<int>{}, std::vector<int>{}) == 0.0);
  }

  TEST_CASE("overfits 50 random codes") {
    Rng rng(5);
    const Matrix codes = random_codes(rng, 50, 16);
    std::vector<int> labels(50);
    for (int& l : labels) l = rng.bernoulli(0.5) ? 1 : 0;
    ClfConfig cfg;
    cfg.epochs = 300;
    cfg.batch = 10;
    cfg.seed = 3;
    const auto res = train_classifier(codes, labels, 2, cfg);
    CHECK(res.history.size() == 300);
    CHECK(misclassification_rate(predict(res.model, codes), labels) == 0.0);
  }

  TEST_CASE("training is deterministic and validated") {
    Rng rng(6);
    const Matrix codes = random_codes(rng, 40, 8);
    std::vector<int> labels(40);
    for (size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
    ClfConfig cfg;
    cfg.epochs = 3;
    cfg.batch = 7;  // leaves a trailing batch of 5
    cfg.hidden1 = 16;
    cfg.hidden2 = 8;
    const auto a = train_classifier(codes, labels, 3, cfg);
    const auto b = train_classifier(codes, labels, 3, cfg);
    CHECK(checkpoint_bytes(a.model) == checkpoint_bytes(b.model));
    cfg.batch = 13;  // trailing batch of one is skipped
    CHECK_NOTHROW(train_classifier(codes, labels, 3, cfg));
    labels[0] = 3;
    CHECK_THROWS(train_classifier(codes, labels, 3, cfg));
    cfg.dropout = 1.0;
    labels[0] = 0;
    CHECK_THROWS_AS(train_classifier(codes, labels, 3, cfg), UsageError);
  }

  TEST_CASE("checkpoint round trip") {
    FfnnModel m = init_ffnn(12, 16, 8, 5, 4);
    m.params.bn1.running_mean.setConstant(0.25f);
    std::stringstream ss;
    save_ffnn(ss, m);
    const FfnnModel back = load_ffnn(ss);
    CHECK(back.params.W1 == m.params.W1);
    CHECK(back.params.bn1.running_mean == m.params.bn1.running_mean);
    CHECK(back.params.W3 == m.params.W3);
    CHECK(back.params.classes() == 5);
    CHECK(checkpoint_bytes(back) == checkpoint_bytes(m));
    const std::string bytes = checkpoint_bytes(m);
    std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_ffnn(truncated), DataError);
  }
}
