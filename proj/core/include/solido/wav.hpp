#pragma once

#include <string>

#include "solido/dsp.hpp"

namespace solido {

// PCM16 RIFF/WAVE only. Stereo is downmixed by channel average (with a warning
// on stderr); samples map to [-1, 1] via 1/32768.
dsp::AudioClip wav_read(const std::string& path);

// Quantizes round-half-away-from-zero, clamped to the PCM16 range.
void wav_write(const std::string& path, const dsp::AudioClip& clip);

}  // namespace solido
