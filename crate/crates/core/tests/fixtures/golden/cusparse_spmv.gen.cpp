#include <cstdint>
#include <cstdlib>
#include "lilac_runtime.h"
#include <cuda_runtime.h>
#include <cusparse_v2.h>

template<typename type_in, typename type_out>
void ReadLast_update(type_in* in, int size, type_out& out) {
    out = size > 0 ? in[size - 1] : 0;
}
template<typename type_in, typename type_out>
void ReadLast_construct(int size, type_out& out) {}
template<typename type_in, typename type_out>
void ReadLast_destruct(int size, type_out& out) {}
template<typename type_in, typename type_out>
using ReadLast = ReadObject<type_in, type_out,
    ReadLast_update<type_in, type_out>,
    ReadLast_construct<type_in, type_out>,
    ReadLast_destruct<type_in, type_out>>;

template<typename type_in, typename type_out>
void ReadMax_update(type_in* in, int size, type_out& out) {
    out = 0;
    for (int k = 0; k < size; ++k)
        if (in[k] + 1 > out) out = in[k] + 1;
}
template<typename type_in, typename type_out>
void ReadMax_construct(int size, type_out& out) {}
template<typename type_in, typename type_out>
void ReadMax_destruct(int size, type_out& out) {}
template<typename type_in, typename type_out>
using ReadMax = ReadObject<type_in, type_out,
    ReadMax_update<type_in, type_out>,
    ReadMax_construct<type_in, type_out>,
    ReadMax_destruct<type_in, type_out>>;

template<typename type_in, typename type_out>
void CudaRead_update(type_in* in, int size, type_out& out) {
    cudaMemcpy(out, in, sizeof(type_in) * size, cudaMemcpyHostToDevice);
}
template<typename type_in, typename type_out>
void CudaRead_construct(int size, type_out& out) {
    cudaMalloc(&out, sizeof(type_in) * size);
}
template<typename type_in, typename type_out>
void CudaRead_destruct(int size, type_out& out) {
    cudaFree(out);
}
template<typename type_in, typename type_out>
using CudaRead = ReadObject<type_in, type_out,
    CudaRead_update<type_in, type_out>,
    CudaRead_construct<type_in, type_out>,
    CudaRead_destruct<type_in, type_out>>;

template<typename type_in, typename type_out>
void CudaWrite_update(type_in* in, int size, type_out& out) {
    cudaMemcpy(in, out, sizeof(type_in) * size, cudaMemcpyDeviceToHost);
}
template<typename type_in, typename type_out>
void CudaWrite_construct(int size, type_out& out) {
    cudaMalloc(&out, sizeof(type_in) * size);
}
template<typename type_in, typename type_out>
void CudaWrite_destruct(int size, type_out& out) {
    cudaFree(out);
}
template<typename type_in, typename type_out>
using CudaWrite = WriteObject<type_in, type_out,
    CudaWrite_update<type_in, type_out>,
    CudaWrite_construct<type_in, type_out>,
    CudaWrite_destruct<type_in, type_out>>;

struct cusparse_spmv_state {
    bool initialized = false;
    cusparseHandle_t handle;
    cusparseMatDescr_t descr;
    ReadLast<int64_t, int> nnz_object;
    ReadMax<int64_t, int> cols_object;
    CudaRead<int64_t, int*> dev_row_ptr_object;
    CudaRead<int64_t, int*> dev_col_ind_object;
    CudaRead<double, double*> dev_val_object;
    CudaRead<double, double*> dev_x_object;
    CudaWrite<double, double*> dev_out_object;
};

static cusparse_spmv_state cusparse_spmv_global;

static void cusparse_spmv_teardown() {
    cusparse_spmv_state& state = cusparse_spmv_global;
    auto& handle = state.handle;
    auto& descr = state.descr;
    {
        cusparseDestroyMatDescr(descr);
        cusparseDestroy(handle);
    }
    state.dev_out_object.release();
    state.dev_x_object.release();
    state.dev_val_object.release();
    state.dev_col_ind_object.release();
    state.dev_row_ptr_object.release();
    state.cols_object.release();
    state.nnz_object.release();
}

extern "C" void cusparse_spmv(int64_t rows, double* output, int64_t* row_ptr, double* val, double* x, int64_t* col_ind) {
    cusparse_spmv_state& state = cusparse_spmv_global;
    auto& handle = state.handle;
    auto& descr = state.descr;
    if (!state.initialized) {
        state.initialized = true;
        {
            cusparseCreate(&handle);
            cusparseCreateMatDescr(&descr);
        }
        std::atexit(cusparse_spmv_teardown);
    }
    auto& nnz = state.nnz_object.acquire(row_ptr, rows + 1);
    auto& cols = state.cols_object.acquire(col_ind, nnz);
    auto& dev_row_ptr = state.dev_row_ptr_object.acquire(row_ptr, rows + 1);
    auto& dev_col_ind = state.dev_col_ind_object.acquire(col_ind, nnz);
    auto& dev_val = state.dev_val_object.acquire(val, nnz);
    auto& dev_x = state.dev_x_object.acquire(x, cols);
    auto& dev_out = state.dev_out_object.acquire(output, rows);
    {
        double one = 1.0, zero = 0.0;
        cusparseDcsrmv(handle, CUSPARSE_OPERATION_NON_TRANSPOSE, rows, cols, nnz,
                       &one, descr, dev_val, dev_row_ptr, dev_col_ind, dev_x,
                       &zero, dev_out);
    }
    state.dev_out_object.write_back(output, rows);
}
