#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace breathtutor {

class WavError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class WavFormat { pcm16, float32 };

/// Decoded audio, downmixed to mono.
struct WavData {
  int sample_rate = 0;
  int channels = 0;  ///< channel count in the file before downmixing
  std::vector<float> samples;
};

/// Reads RIFF/WAVE with 16-bit PCM or 32-bit float data, any channel count.
WavData read_wav(const std::string& path);

void write_wav(const std::string& path, const std::vector<float>& mono, int sample_rate,
               WavFormat format = WavFormat::float32);

}  // namespace breathtutor
