/* Loop-heavy toy kernel: integer matrix multiply plus a checksum. */
#include <stdio.h>
#include <stdint.h>

#define N 160

static uint32_t a[N][N], b[N][N], c[N][N];

int main(void)
{
    uint32_t seed = 12345u;
    for (int i = 0; i < N; i++)
        for (int j = 0; j < N; j++) {
            seed = seed * 1103515245u + 12345u;
            a[i][j] = (seed >> 16) & 0xff;
            seed = seed * 1103515245u + 12345u;
            b[i][j] = (seed >> 16) & 0xff;
        }
    for (int rep = 0; rep < 60; rep++)
        for (int i = 0; i < N; i++)
            for (int k = 0; k < N; k++) {
                uint32_t aik = a[i][k] + (uint32_t)rep;
                for (int j = 0; j < N; j++)
                    c[i][j] += aik * b[k][j];
            }
    uint64_t sum = 0;
    for (int i = 0; i < N; i++)
        for (int j = 0; j < N; j++)
            sum = sum * 31u + c[i][j];
    printf("%llu\n", (unsigned long long)sum);
    return 0;
}
