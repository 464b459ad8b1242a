#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <string>

#include "glyphnet/errors.hpp"
#include "glyphnet/image.hpp"

namespace glyphnet {

// Decodes a PNG/JPEG file to an RGB double image in [0, 1].
inline Image load_image(const std::string& path) {
  const cv::Mat raw = cv::imread(path, cv::IMREAD_COLOR);
  if (raw.empty()) throw DataError("load_image: cannot decode " + path);
  Image img(raw.rows, raw.cols, 3);
  for (int y = 0; y < raw.rows; ++y) {
    const cv::Vec3b* row = raw.ptr<cv::Vec3b>(y);
    for (int x = 0; x < raw.cols; ++x) {
      img.at(y, x, 0) = row[x][2] / 255.0;  // BGR -> RGB
      img.at(y, x, 1) = row[x][1] / 255.0;
      img.at(y, x, 2) = row[x][0] / 255.0;
    }
  }
  return img;
}

inline void save_png(const Image& img, const std::string& path) {
  require(img.c == 1 || img.c == 3, "save_png: channels must be 1 or 3");
  cv::Mat mat(img.h, img.w, img.c == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      const auto q = [&](int ch) {
        const double v = std::clamp(img.at(y, x, ch), 0.0, 1.0);
        return static_cast<unsigned char>(std::lround(v * 255.0));
      };
      if (img.c == 1) {
        mat.at<unsigned char>(y, x) = q(0);
      } else {
        mat.at<cv::Vec3b>(y, x) = cv::Vec3b(q(2), q(1), q(0));  // RGB -> BGR
      }
    }
  }
  if (!cv::imwrite(path, mat)) throw DataError("save_png: cannot write " + path);
}

}  // namespace glyphnet
