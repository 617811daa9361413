#include "solido/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>

namespace solido {

namespace {

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  T v = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) v = static_cast<T>((v << 8) | buf[i]);
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.put(static_cast<char>(v & 0xff));
    v = static_cast<T>(v >> 8);
  }
}

}  // namespace

dsp::AudioClip wav_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "wav_read: cannot open " + path);

  char tag[4];
  in.read(tag, 4);
  require(in.good() && std::memcmp(tag, "RIFF", 4) == 0, "wav_read: not a RIFF file: " + path);
  read_le<std::uint32_t>(in);  // riff size
  in.read(tag, 4);
  require(in.good() && std::memcmp(tag, "WAVE", 4) == 0, "wav_read: not a WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<std::int16_t> pcm;
  bool have_data = false;

  while (in.peek() != EOF) {
    in.read(tag, 4);
    if (!in.good()) break;
    std::uint32_t size = read_le<std::uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      rate = read_le<std::uint32_t>(in);
      read_le<std::uint32_t>(in);  // byte rate
      read_le<std::uint16_t>(in);  // block align
      bits = read_le<std::uint16_t>(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      require(have_fmt, "wav_read: data chunk before fmt chunk");
      require(format == 1, "wav_read: unsupported codec (only PCM is handled)");
      require(bits == 16, "wav_read: unsupported bit depth " + std::to_string(bits));
      require(channels >= 1, "wav_read: zero channels");
      std::size_t n = size / 2;
      pcm.resize(n);
      for (std::size_t i = 0; i < n; ++i) pcm[i] = static_cast<std::int16_t>(read_le<std::uint16_t>(in));
      require(in.good(), "wav_read: truncated data chunk");
      have_data = true;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);  // chunks are word-aligned
    }
  }
  require(have_data, "wav_read: no data chunk found");
  require(pcm.size() % channels == 0, "wav_read: data size not divisible by channel count");

  if (channels > 1)
    std::cerr << "wav_read: downmixing " << channels << " channels to mono by average: " << path << "\n";

  dsp::AudioClip clip;
  clip.sample_rate = static_cast<double>(rate);
  std::size_t frames = pcm.size() / channels;
  require(frames >= 1, "wav_read: empty audio");
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) acc += static_cast<double>(pcm[f * channels + c]);
    clip.samples[f] = acc / (32768.0 * static_cast<double>(channels));
  }
  return clip;
}

void wav_write(const std::string& path, const dsp::AudioClip& clip) {
  require(clip.sample_rate > 0.0 && clip.length() >= 1, "wav_write: empty clip");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "wav_write: cannot open " + path + " for writing");

  std::uint32_t data_size = static_cast<std::uint32_t>(clip.length() * 2);
  std::uint32_t rate = static_cast<std::uint32_t>(std::llround(clip.sample_rate));

  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, 1);   // PCM
  write_le<std::uint16_t>(out, 1);   // mono
  write_le<std::uint32_t>(out, rate);
  write_le<std::uint32_t>(out, rate * 2);
  write_le<std::uint16_t>(out, 2);
  write_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_size);

  for (double v : clip.samples) {
    double scaled = v * 32768.0;
    double rounded = scaled >= 0.0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5);
    rounded = std::clamp(rounded, -32768.0, 32767.0);
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(rounded)));
  }
  require(out.good(), "wav_write: write failure on " + path);
}

}  // namespace solido
