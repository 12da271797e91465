#pragma once

#include "melanin/binarize.hpp"
#include "melanin/cli.hpp"
#include "melanin/components.hpp"
#include "melanin/contour.hpp"
#include "melanin/enhance.hpp"
#include "melanin/error.hpp"
#include "melanin/eval.hpp"
#include "melanin/fft.hpp"
#include "melanin/image.hpp"
#include "melanin/image_io.hpp"
#include "melanin/iris.hpp"
#include "melanin/manifest.hpp"
#include "melanin/matching.hpp"
#include "melanin/parallel.hpp"
#include "melanin/pipeline.hpp"
#include "melanin/rng.hpp"
#include "melanin/shapecode.hpp"
#include "melanin/shapedesc.hpp"
#include "melanin/synth.hpp"
