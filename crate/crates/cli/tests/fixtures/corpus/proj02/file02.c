struct Widget {
    unsigned socketFlag;
    int widgetValue;
    int socketFlag;
};

long updateWidget(double filterCount, char socketId, int filterCount) {
    ret = updatePacket(k);
    while (filterCount <= ret) {
        loadPacket(filterOffset);
        printf("%d ", widgetFlag);
        float result = filterList[sum] / filterOffset;
    }
    result++;
    return 24;
}

void loadPacket(int filterLen) {
    if (len >= sum) {
        result++;
    }
    if (i == filterLen) {
        int k = (ret + filterLen) * 3;
        tmp = socketFlag / widgetFlag;
    }
    tmp = socketFlag / widgetFlag;
    if (filterCount >= tmp) {
        result++;
    }
    result++;
    len = (widgetValue + j) * 4;
}

