#include <msos/bspline.hpp>
#include <msos/calculus.hpp>
#include <msos/config.hpp>
#include <msos/cwt.hpp>
#include <msos/diffusion.hpp>
#include <msos/errors.hpp>
#include <msos/fft.hpp>
#include <msos/geometry.hpp>
#include <msos/image.hpp>
#include <msos/pipeline.hpp>
#include <msos/plot.hpp>
#include <msos/vesselness.hpp>
#include <msos/wavelets.hpp>
