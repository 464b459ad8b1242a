#pragma once

#include <memory>
#include <string>
#include <vector>

#include "glyphnet/nn.hpp"

namespace glyphnet {

struct InputSize {
  int height = 32;
  int width = 32;
  int channels = 1;
  int flat() const { return height * width * channels; }
};

// Pluggable backbone contract: a batch of flattened images in, a batch of
// feature vectors out, with a matching backward pass for end-to-end training.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual const std::string& name() const = 0;
  virtual int output_dim() const = 0;
  virtual InputSize input_size() const = 0;
  virtual Matrix forward(const Matrix& images, bool train) = 0;
  virtual Matrix backward(const Matrix& d_features) = 0;
  virtual std::vector<Param*> params() = 0;
};

// Small three-block CNN for desk-scale runs: (conv3x3-relu-maxpool) x 3 with
// 16/32/64 channels on 32x32 input, then global average pooling to 64 dims.
class TinyCnnEncoder final : public Encoder {
 public:
  explicit TinyCnnEncoder(int input_channels, Rng& rng)
      : name_("tiny_cnn"), input_(InputSize{32, 32, input_channels}),
        conv1_("encoder.conv1", 32, 32, input_channels, 16, rng),
        pool1_(32, 32, 16),
        conv2_("encoder.conv2", 16, 16, 16, 32, rng),
        pool2_(16, 16, 32),
        conv3_("encoder.conv3", 8, 8, 32, 64, rng),
        pool3_(8, 8, 64),
        gap_(4, 4, 64) {
    require(input_channels == 1 || input_channels == 3,
            "tiny_cnn: input_channels must be 1 or 3");
  }

  const std::string& name() const override { return name_; }
  int output_dim() const override { return 64; }
  InputSize input_size() const override { return input_; }

  Matrix forward(const Matrix& images, bool train) override {
    require(images.cols() == input_.flat(),
            "tiny_cnn: expected " + std::to_string(input_.flat()) +
                " values per image row (" + std::to_string(input_.height) + "x" +
                std::to_string(input_.width) + "x" + std::to_string(input_.channels) +
                "), got " + std::to_string(images.cols()));
    Matrix x = relu1_.forward(conv1_.forward(images, train), train);
    x = pool1_.forward(x, train);
    x = relu2_.forward(conv2_.forward(x, train), train);
    x = pool2_.forward(x, train);
    x = relu3_.forward(conv3_.forward(x, train), train);
    x = pool3_.forward(x, train);
    return gap_.forward(x, train);
  }

  Matrix backward(const Matrix& d_features) override {
    Matrix d = gap_.backward(d_features);
    d = conv3_.backward(relu3_.backward(pool3_.backward(d)));
    d = conv2_.backward(relu2_.backward(pool2_.backward(d)));
    return conv1_.backward(relu1_.backward(pool1_.backward(d)));
  }

  std::vector<Param*> params() override {
    std::vector<Param*> out;
    for (auto* layer : {&conv1_, &conv2_, &conv3_})
      for (Param* p : layer->params()) out.push_back(p);
    return out;
  }

 private:
  std::string name_;
  InputSize input_;
  Conv3x3 conv1_;
  Relu relu1_;
  MaxPool2 pool1_;
  Conv3x3 conv2_;
  Relu relu2_;
  MaxPool2 pool2_;
  Conv3x3 conv3_;
  Relu relu3_;
  MaxPool2 pool3_;
  GlobalAvgPool gap_;
};

// Creates an encoder by name; the seed controls weight initialization.
inline std::unique_ptr<Encoder> make_encoder(const std::string& name, int input_channels,
                                             Rng& rng) {
  if (name == "tiny_cnn") return std::make_unique<TinyCnnEncoder>(input_channels, rng);
  throw ConfigError("unknown encoder '" + name + "' (available: tiny_cnn)");
}

}  // namespace glyphnet
