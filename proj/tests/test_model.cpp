#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <set>

#include "glyphnet/checkpoint.hpp"
#include "glyphnet/model.hpp"
#include "test_support.hpp"

using namespace glyphnet;
using namespace testsupport;

namespace {

ModelConfig tiny_config(int num_classes = 5, int z_dim = 16) {
  ModelConfig cfg;
  cfg.encoder = "tiny_cnn";
  cfg.input_channels = 1;
  cfg.z_dim = z_dim;
  cfg.num_classes = num_classes;
  cfg.cosine_scale = 30.0;
  return cfg;
}

Matrix random_images(Rng& rng, int batch, int flat) {
  Matrix m(batch, flat);
  for (int i = 0; i < batch; ++i)
    for (int j = 0; j < flat; ++j) m(i, j) = rng.uniform();
  return m;
}

}  // namespace

TEST_CASE("forward produces the contracted shapes and normalized outputs") {
  CcfgModel model(tiny_config(), 7);
  Rng rng(1);
  const Matrix images = random_images(rng, 2, 32 * 32);
  const DualHeadOutput out = model.forward(images, false);

  REQUIRE(out.z_e.rows() == 2);
  REQUIRE(out.z_e.cols() == 16);
  REQUIRE(out.z_a_raw.rows() == 2);
  REQUIRE(out.r.cols() == 5);
  REQUIRE(out.r_prime.cosines.cols() == 5);
  REQUIRE(out.t.cols() == 5);
  REQUIRE(out.b.cols() == 5);

  for (int i = 0; i < 2; ++i) {
    REQUIRE(std::abs(out.z_e.row(i).norm() - 1.0) <= 1e-6);
    REQUIRE(out.t.row(i).sum() == Catch::Approx(1.0).margin(1e-5));
    REQUIRE(out.b.row(i).sum() == Catch::Approx(1.0).margin(1e-5));
  }
  REQUIRE_NOTHROW(out.r_prime.validate());
}

TEST_CASE("forward is deterministic and duplicates map to identical rows") {
  CcfgModel model(tiny_config(), 7);
  Rng rng(2);
  Matrix images = random_images(rng, 2, 32 * 32);
  images.row(1) = images.row(0);
  const DualHeadOutput out = model.forward(images, false);
  REQUIRE((out.t.row(0) - out.t.row(1)).cwiseAbs().maxCoeff() <= 1e-6);
  REQUIRE((out.z_e.row(0) - out.z_e.row(1)).cwiseAbs().maxCoeff() <= 1e-6);

  const DualHeadOutput again = model.forward(images, false);
  REQUIRE((again.b - out.b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward rejects empty batches and misshaped inputs with a diagnostic") {
  CcfgModel model(tiny_config(), 7);
  REQUIRE_THROWS_AS(model.forward(Matrix(0, 32 * 32), false), std::invalid_argument);
  try {
    model.forward(Matrix::Zero(1, 100), false);
    FAIL("expected shape rejection");
  } catch (const std::invalid_argument& e) {
    REQUIRE(std::string(e.what()).find("1024") != std::string::npos);
    REQUIRE(std::string(e.what()).find("100") != std::string::npos);
  }
}

TEST_CASE("predict averages the two heads and breaks ties on the lowest index") {
  CcfgModel model(tiny_config(), 9);
  Rng rng(3);
  const Matrix images = random_images(rng, 4, 32 * 32);
  const auto [avg, cls] = model.predict(images);
  const DualHeadOutput out = model.forward(images, false);
  REQUIRE((avg - 0.5 * (out.t + out.b)).cwiseAbs().maxCoeff() <= 1e-7);
  for (int i = 0; i < 4; ++i) REQUIRE(avg.row(i).sum() == Catch::Approx(1.0).margin(1e-5));

  Matrix probs(1, 3);
  probs << 0.5, 0.5, 0.0;
  REQUIRE(CcfgModel::argmax_rows(probs)[0] == 0);
}

TEST_CASE("forward_stage1 yields unit embeddings usable by scl_loss") {
  Stage1Model model(tiny_config(), 11);
  Rng rng(4);
  Matrix images = random_images(rng, 3, 32 * 32);
  images.row(2) = images.row(0);
  IntVector labels(3);
  labels << 0, 1, 0;
  const EmbeddingBatch z = model.forward_stage1(images, labels, false);
  REQUIRE(z.unit_normalized);
  for (int i = 0; i < 3; ++i) REQUIRE(std::abs(z.vectors.row(i).norm() - 1.0) <= 1e-6);
  REQUIRE((z.vectors.row(2) - z.vectors.row(0)).cwiseAbs().maxCoeff() <= 1e-9);
  const double loss = scl_loss(z, 0.07);
  REQUIRE(std::isfinite(loss));
}

TEST_CASE("cosine head logits are invariant to positive row rescaling") {
  CcfgModel model(tiny_config(), 13);
  Rng rng(5);
  const Matrix images = random_images(rng, 2, 32 * 32);
  const Matrix before = model.forward(images, false).r_prime.cosines;
  model.head_a().weight.value.row(2) *= 7.5;
  const Matrix after = model.forward(images, false).r_prime.cosines;
  REQUIRE((before - after).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("trainable parameters partition into encoder and branch groups") {
  CcfgModel model(tiny_config(), 17);
  std::set<std::string> names;
  for (const Param* p : model.params()) REQUIRE(names.insert(p->name).second);

  const auto group = [&](const std::string& prefix) {
    std::set<std::string> out;
    for (const auto& n : names)
      if (n.rfind(prefix, 0) == 0) out.insert(n);
    return out;
  };
  const auto enc = group("encoder.");
  const auto branch_e = group("proj_e.");
  const auto head_e = group("head_e.");
  const auto branch_a = group("proj_a.");
  const auto head_a = group("head_a.");
  REQUIRE(enc.size() + branch_e.size() + head_e.size() + branch_a.size() + head_a.size() ==
          names.size());
  REQUIRE(!enc.empty());
  REQUIRE(branch_e.size() == 2);
  REQUIRE(head_e.size() == 2);
  REQUIRE(branch_a.size() == 2);
  REQUIRE(head_a.size() == 1);
}

TEST_CASE("checkpoint round-trips to identical forward outputs") {
  const ModelConfig cfg = tiny_config();
  CcfgModel model(cfg, 19);
  Rng rng(6);
  const Matrix images = random_images(rng, 3, 32 * 32);
  const DualHeadOutput before = model.forward(images, false);

  nlohmann::json manifest;
  manifest["stage"] = "stage2";
  manifest["encoder"] = cfg.encoder;
  manifest["input_channels"] = cfg.input_channels;
  manifest["z_dim"] = cfg.z_dim;
  manifest["num_classes"] = cfg.num_classes;
  const Checkpoint ckpt = snapshot_params(model.params(), manifest);
  const std::string path =
      (std::filesystem::temp_directory_path() / "glyphnet_ckpt_test.json").string();
  ckpt.save(path);

  CcfgModel restored(cfg, 999);  // different init seed; weights come from the file
  restore_params(restored.params(), Checkpoint::load(path));
  const DualHeadOutput after = restored.forward(images, false);
  REQUIRE((after.t - before.t).cwiseAbs().maxCoeff() <= 1e-7);
  REQUIRE((after.b - before.b).cwiseAbs().maxCoeff() <= 1e-7);
  REQUIRE((after.z_e - before.z_e).cwiseAbs().maxCoeff() <= 1e-7);
  std::remove(path.c_str());
}

TEST_CASE("restore_params rejects missing arrays and shape mismatches") {
  CcfgModel model(tiny_config(), 23);
  Checkpoint ckpt = snapshot_params(model.params(), {});
  ckpt.arrays.erase("head_a.weight");
  REQUIRE_THROWS_AS(restore_params(model.params(), ckpt), DataError);

  Checkpoint bad = snapshot_params(model.params(), {});
  bad.arrays["head_a.weight"] = Matrix::Zero(2, 2);
  REQUIRE_THROWS_AS(restore_params(model.params(), bad), std::invalid_argument);
}

// End-to-end backprop check: the full stage-2 objective differentiated through
// both branches and the encoder must match finite differences on sampled
// parameter entries.
TEST_CASE("stage-2 backward matches finite differences through the whole network") {
  const ModelConfig cfg = tiny_config(4, 8);
  CcfgModel model(cfg, 29);
  Rng rng(7);
  const int n = 3;
  const Matrix images = random_images(rng, 2 * n, 32 * 32);
  IntVector left_labels = random_labels(rng, n, 4);
  IntVector right_labels = random_labels(rng, n, 4);
  IntVector flags = flags_from_labels(left_labels, right_labels);
  const LossConfig loss;

  const auto objective = [&]() {
    DualHeadOutput out = model.forward(images, true);
    const Matrix t_cl = out.t.cwiseMax(1e-12);
    const double focal = focal_pair_loss(t_cl.topRows(n), t_cl.bottomRows(n), left_labels,
                                         right_labels, loss.gamma);
    const double lmcl =
        lmcl_loss(out.r_prime.cosines.topRows(n), out.r_prime.cosines.bottomRows(n),
                  left_labels, right_labels, loss.s, loss.m_c);
    const double l_e = euclidean_pair_loss(out.z_e.topRows(n), out.z_e.bottomRows(n),
                                           flags, loss.m_e);
    const double l_a = angular_pair_loss(out.r_prime.cosines.topRows(n),
                                         out.r_prime.cosines.bottomRows(n), flags, loss.m_a);
    return total_loss(focal, lmcl, l_e, l_a, loss.lambda);
  };

  // Analytic pass.
  DualHeadOutput out = model.forward(images, true);
  const Matrix t_cl = out.t.cwiseMax(1e-12);
  Matrix d_t = Matrix::Zero(2 * n, 4), d_cos = Matrix::Zero(2 * n, 4),
         d_ze = Matrix::Zero(2 * n, 8);
  {
    auto [gl, gr] = focal_pair_loss_grad(t_cl.topRows(n), t_cl.bottomRows(n), left_labels,
                                         right_labels, loss.gamma);
    d_t.topRows(n) = gl;
    d_t.bottomRows(n) = gr;
  }
  {
    auto [gl, gr] =
        lmcl_loss_grad(out.r_prime.cosines.topRows(n), out.r_prime.cosines.bottomRows(n),
                       left_labels, right_labels, loss.s, loss.m_c);
    d_cos.topRows(n) += gl;
    d_cos.bottomRows(n) += gr;
  }
  {
    auto [gl, gr] = angular_pair_loss_grad(out.r_prime.cosines.topRows(n),
                                           out.r_prime.cosines.bottomRows(n), flags, loss.m_a);
    d_cos.topRows(n) += loss.lambda * gl;
    d_cos.bottomRows(n) += loss.lambda * gr;
  }
  {
    auto [gl, gr] = euclidean_pair_loss_grad(out.z_e.topRows(n), out.z_e.bottomRows(n),
                                             flags, loss.m_e);
    d_ze.topRows(n) = loss.lambda * gl;
    d_ze.bottomRows(n) = loss.lambda * gr;
  }
  model.zero_grads();
  model.backward(d_t, d_cos, d_ze);

  // Sampled finite differences over every parameter block.
  const double h = 1e-6;
  Rng pick(8);
  for (Param* p : model.params()) {
    for (int trial = 0; trial < 4; ++trial) {
      const int i = pick.uniform_int(0, static_cast<int>(p->value.rows()) - 1);
      const int j = pick.uniform_int(0, static_cast<int>(p->value.cols()) - 1);
      const double saved = p->value(i, j);
      p->value(i, j) = saved + h;
      const double fp = objective();
      p->value(i, j) = saved - h;
      const double fm = objective();
      p->value(i, j) = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = p->grad(i, j);
      const double err = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-2});
      INFO(p->name << "(" << i << "," << j << ") analytic " << analytic << " numeric "
                   << numeric);
      REQUIRE(err <= 2e-3);
    }
  }
}
